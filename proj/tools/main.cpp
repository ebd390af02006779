#include "tariffgame/cli.hpp"

int main(int argc, char** argv) { return tariffgame::cli::run(argc, argv); }
