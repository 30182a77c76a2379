#include "hbbs/cli.hpp"

int main(int argc, char** argv) { return hbbs::cli::dispatch(argc, argv); }
