#include "mfs/cli.hpp"

int main(int argc, char** argv) { return mfs::run_cli(argc, argv); }
