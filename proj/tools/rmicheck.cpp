#include <iostream>

#include "rmi/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return rmi::run_cli(args, std::cout, std::cerr);
}
