#include "widepose/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return widepose::run_cli(argc, argv, std::cout, std::cerr); }
