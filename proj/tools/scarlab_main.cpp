#include <iostream>

#include "scarlab/cli_io.hpp"

int main(int argc, char** argv) { return scarlab::cli_main(argc, argv, std::cout, std::cerr); }
