#include "vcam/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return vcam::cli::main_entry(argc, argv, std::cout, std::cerr); }
