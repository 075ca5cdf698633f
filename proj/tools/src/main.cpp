#include "trav/cli.hpp"

int main(int argc, char** argv) { return trav::cli::run(argc, argv); }
