#include "fourier/cli/dispatch.hpp"

int main(int argc, char** argv) { return fourier::cli::dispatch(argc, argv); }
