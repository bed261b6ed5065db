#include "uballoc/cli.hpp"

int main(int argc, char** argv) { return uballoc::cli::run_cli(argc, argv); }
