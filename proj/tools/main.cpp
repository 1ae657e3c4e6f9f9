#include "cli.hpp"

int main(int argc, char** argv) { return paracontrol::cli::run_command(argc, argv); }
