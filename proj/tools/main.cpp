#include "rankatt/cli.hpp"

int main(int argc, char** argv) { return rankatt::cli_main(argc, argv); }
