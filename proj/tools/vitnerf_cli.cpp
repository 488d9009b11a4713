#include <iostream>

#include "vitnerf/cli/commands.hpp"

int main(int argc, char** argv) { return vitnerf::cli::run(argc, argv, std::cout, std::cerr); }
