#include <iostream>

#include "remtime/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return remtime::cli::run(args, std::cout, std::cerr);
}
