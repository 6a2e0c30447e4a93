#include <iostream>

#include "adabayes/commands.hpp"

int main(int argc, char** argv) {
    return adabayes::cli::run_cli(argc, argv, std::cout, std::cerr);
}
