#include <iostream>

#include "robust_merton/cli.hpp"

int main(int argc, char** argv) { return robust_merton::run_cli(argc, argv, std::cout, std::cerr); }
