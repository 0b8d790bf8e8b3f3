#include "objsoup/harness.hpp"

int main(int argc, char** argv) { return objsoup::cli_main(argc, argv); }
