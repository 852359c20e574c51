#include <iostream>

#include "vsls/cli.hpp"

int main(int argc, char** argv) { return vsls::run_cli(argc, argv, std::cout, std::cerr); }
