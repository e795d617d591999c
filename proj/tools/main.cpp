#include "cli.hpp"

int main(int argc, char** argv) { return planefield::cli::run(argc, argv); }
