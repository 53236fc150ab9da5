#include "commands.hpp"

int main(int argc, char** argv) { return advplace::cli::run(argc, argv); }
