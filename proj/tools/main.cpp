#include "commands.hpp"

int main(int argc, char** argv) { return mirrorfield::cli::run(argc, argv); }
