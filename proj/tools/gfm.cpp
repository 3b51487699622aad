#include "gfm/cli/app.hpp"

int main(int argc, char** argv) { return gfm::cli::run(argc, argv); }
