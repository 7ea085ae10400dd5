#include "mixlogit/cli.hpp"

int main(int argc, char** argv) { return mixlogit::cli_main(argc, argv); }
