#include "mentra/cli.hpp"

int main(int argc, char** argv) { return mentra::cli::run(argc, argv); }
