#include "commands.hpp"

int main(int argc, char** argv) { return occ::cli::run(argc, argv); }
