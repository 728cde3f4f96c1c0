#include "mvspl/cli.hpp"

int main(int argc, char** argv) { return mvspl::dispatch(argc, argv); }
