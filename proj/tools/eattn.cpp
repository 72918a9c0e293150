#include "eattn/cli.hpp"

int main(int argc, char** argv) { return eattn::cli::main_entry(argc, argv); }
