#include "tenrec/cli.hpp"

int main(int argc, char** argv) { return tenrec::cli_main(argc, argv); }
