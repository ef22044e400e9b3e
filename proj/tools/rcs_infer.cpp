#include "eidgm/cli.hpp"

int main(int argc, char** argv) { return eidgm::cli::run(argc, argv); }
