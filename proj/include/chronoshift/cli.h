#pragma once

#include <string>
#include <vector>

namespace chronoshift {

// Runs the command-line interface; returns the process exit status. Errors
// are reported on standard error as "error: <code>: <message>".
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace chronoshift
