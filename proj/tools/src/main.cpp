#include <iostream>

#include "stp/cli.hpp"

int main(int argc, char** argv) { return stp::cli::run(argc, argv, std::cout, std::cerr); }
