#include <iostream>
#include <string>
#include <vector>

#include "cwr/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cwr::cli::run(args, std::cout, std::cerr);
}
