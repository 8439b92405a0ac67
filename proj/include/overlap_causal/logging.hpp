#pragma once

#include <cstdlib>
#include <memory>
#include <mutex>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace overlap_causal {

/// Library logger on stderr. Level comes from OVERLAP_CAUSAL_LOG
/// (trace, debug, info, warn, error, off); default warn.
inline std::shared_ptr<spdlog::logger> logger() {
    static std::once_flag once;
    static std::shared_ptr<spdlog::logger> instance;
    std::call_once(once, [] {
        instance = spdlog::get("overlap_causal");
        if (!instance) instance = spdlog::stderr_color_mt("overlap_causal");
        const char* env = std::getenv("OVERLAP_CAUSAL_LOG");
        instance->set_level(env != nullptr ? spdlog::level::from_str(env) : spdlog::level::warn);
    });
    return instance;
}

}  // namespace overlap_causal
