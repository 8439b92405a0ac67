#include "overlap_causal/cli.hpp"

int main(int argc, char** argv) { return overlap_causal::cli::run(argc, argv); }
