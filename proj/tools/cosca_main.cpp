#include "cosca/cli.hpp"

int main(int argc, char** argv) { return cosca::cli::run_main(argc, argv); }
