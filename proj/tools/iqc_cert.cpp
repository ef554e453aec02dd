#include "iqccert/cli.hpp"

int main(int argc, char** argv) { return iqccert::cli::run(argc, argv); }
