#include <iostream>

#include "densel/cli.hpp"

int main(int argc, char** argv)
{
    return densel::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
