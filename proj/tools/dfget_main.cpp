#include <iostream>

#include "dfget/cli.hpp"

int main(int argc, char** argv) {
    return dfget::run_cli(argc, argv, std::cout, std::cerr);
}
