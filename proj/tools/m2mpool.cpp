#include <iostream>

#include "m2mpool/cli.hpp"

int main(int argc, char** argv) { return m2mpool::cli::run(argc, argv, std::cout, std::cerr); }
