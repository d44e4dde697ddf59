#include "cli.hpp"

int main(int argc, char** argv) { return fdi::cli::main(argc, argv); }
