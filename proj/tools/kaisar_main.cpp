#include "kaisar/frontend.hpp"

int main(int argc, char** argv) { return kaisar::cli_main(argc, argv); }
