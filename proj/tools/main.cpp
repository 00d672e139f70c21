#include "flowseek/cli.hpp"

int main(int argc, char** argv) { return flowseek::cli::run(argc, argv); }
