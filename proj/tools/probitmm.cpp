#include "probitmm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return probitmm::cli::run(argc, argv, std::cout, std::cerr); }
