#include "opl/cli.hpp"

int main(int argc, char** argv) { return opl::cli::run(argc, argv); }
