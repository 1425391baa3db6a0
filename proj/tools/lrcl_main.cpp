#include "lrcl/cli.hpp"

int main(int argc, char** argv) { return lrcl::run_cli(argc, argv); }
