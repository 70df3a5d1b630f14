#include <iostream>

#include "wireguide/cli/commands.hpp"

int main(int argc, char** argv) {
    return wireguide::cli::run_cli(argc, argv, std::cout, std::cerr);
}
