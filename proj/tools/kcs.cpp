#include "kcs/cli.hpp"

int main(int argc, char** argv) { return kcs::cli_main(argc, argv); }
