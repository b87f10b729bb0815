#include "losstrunc/cli/commands.hpp"

int main(int argc, char** argv) { return losstrunc::cli::run_app(argc, argv); }
