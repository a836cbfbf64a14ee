#include <iostream>

#include "scatlen/cli.hpp"

int main(int argc, char** argv) { return scatlen::cli::run(argc, argv, std::cout, std::cerr); }
