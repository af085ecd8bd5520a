#include "srmtl/cli.hpp"

int main(int argc, char** argv) { return srmtl::cli::run(argc, argv); }
