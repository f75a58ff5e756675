#include "hmqc/cli.hpp"

int main(int argc, char** argv) { return hmqc::cli::run(argc, argv); }
