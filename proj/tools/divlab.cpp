#include <iostream>
#include <string>
#include <vector>

#include "divlab_cli.hpp"

int main(int argc, char** argv) {
    return divlab::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
