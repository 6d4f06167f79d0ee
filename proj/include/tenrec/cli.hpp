#pragma once

#include <iostream>

namespace tenrec {

// Entry point of the command-line tool. Exit codes: 0 ok, 1 usage or input
// error, 2 numeric failure.
int cli_main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace tenrec
