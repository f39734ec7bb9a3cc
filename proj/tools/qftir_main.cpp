#include <iostream>

#include "qftir/cli.hpp"

int main(int argc, char** argv) { return qftir::cli::run(argc, argv, std::cout, std::cerr); }
