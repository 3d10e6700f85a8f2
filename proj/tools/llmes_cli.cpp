#include <iostream>

#include "llmes/cli.hpp"

int main(int argc, char** argv) {
    return llmes::run_cli(argc, argv, std::cout, std::cerr);
}
