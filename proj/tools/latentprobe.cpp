#include "lp/cli.hpp"

int main(int argc, char** argv) { return lp::run_cli(argc, argv); }
