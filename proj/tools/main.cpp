#include <iostream>

#include "corestable/cli.hpp"

int main(int argc, char** argv) { return corestable::cli::run(argc, argv, std::cout, std::cerr); }
