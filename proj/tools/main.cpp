#include "velatt/cli.hpp"

int main(int argc, char** argv) { return velatt::run_cli(argc, argv); }
