#include "uampmf/cli.hpp"

int main(int argc, char** argv) { return uampmf::cli_main(argc, argv); }
