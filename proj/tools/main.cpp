#include "cli.hpp"

int main(int argc, char** argv) { return deschash::tools::run_cli(argc, argv); }
