#include "irisforge/cli.hpp"

int main(int argc, char** argv) { return irisforge::cli::run(argc, argv); }
