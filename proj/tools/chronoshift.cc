#include "chronoshift/cli.h"

int main(int argc, char** argv) { return chronoshift::run_cli(argc, argv); }
