#include "biastrace/cli.hpp"

int main(int argc, char** argv) { return biastrace::cli::run(argc, argv); }
