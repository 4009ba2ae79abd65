#include "ngram/cli.hpp"

int main(int argc, char** argv) { return ngram::run_cli(argc, argv); }
