#include "coplay/cli/cli.hpp"

int main(int argc, char** argv) { return coplay::cli::run(argc, argv, std::cout, std::cerr); }
