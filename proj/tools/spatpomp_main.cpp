#include <iostream>

#include "spatpomp/cli.hpp"

int main(int argc, char** argv) { return spatpomp::cli::run(argc, argv, std::cout, std::cerr); }
