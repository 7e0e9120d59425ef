#include "fevo/cli.hpp"

int main(int argc, char** argv) { return fevo::cli::run(argc, argv); }
