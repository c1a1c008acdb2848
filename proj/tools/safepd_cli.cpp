#include "safepd/cli.hpp"

int main(int argc, char** argv) { return safepd::cli::main(argc, argv); }
