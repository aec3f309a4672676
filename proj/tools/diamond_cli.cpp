#include "cli.hpp"

int main(int argc, char** argv) { return diamond::cli::run_cli(argc, argv); }
