#include <iostream>

#include "midc/commands.hpp"

int main(int argc, char** argv) { return midc::run_cli(argc, argv, std::cout, std::cerr); }
