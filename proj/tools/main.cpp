#include "flowecon/cli.hpp"

int main(int argc, char** argv) {
    return flowecon::cli::run({argv + 1, argv + argc});
}
