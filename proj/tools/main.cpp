#include "pwdts/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return pwdts::cli::run(argc, argv, std::cout, std::cerr); }
