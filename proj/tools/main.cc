#include <iostream>

#include "commands.h"

int main(int argc, char **argv) { return causeweave::cli::run(argc, argv, std::cout, std::cerr); }
