#include "tsen/cli.hpp"

int main(int argc, char** argv) { return tsen::run_cli(argc, argv); }
