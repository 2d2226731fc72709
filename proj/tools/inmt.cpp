#include "inmt/cli.hpp"

int main(int argc, char** argv) { return inmt::cli_main(argc, argv); }
