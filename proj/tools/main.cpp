#include "starpix/cli/cli.hpp"

int main(int argc, char** argv) { return starpix::cli::dispatch(argc, argv); }
