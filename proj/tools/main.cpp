#include "cli.hpp"

int main(int argc, char** argv) { return fbcast::cli::run(argc, argv); }
