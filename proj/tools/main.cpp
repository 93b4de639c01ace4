#include "vdwalk/cli/commands.hpp"

int main(int argc, char** argv) { return vdwalk::cli::cli_main(argc, argv); }
