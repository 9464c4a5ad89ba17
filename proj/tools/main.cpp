#include "photonparity/cli.h"

int main(int argc, char** argv) { return photonparity::cli::run(argc, argv); }
