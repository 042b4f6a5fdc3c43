#include "recon/cli.hpp"

int main(int argc, char** argv) { return recon::cli_main(argc, argv); }
