#include "shmm/cli/commands.hpp"

int main(int argc, char** argv) { return shmm::cli::run_cli(argc, argv); }
