#include <iostream>
#include <string>
#include <vector>

#include "balmarket/cli_io.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return balmarket::run_cli(args, std::cout, std::cerr);
}
