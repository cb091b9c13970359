#include <vector>

#include "unts/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return unts::cli_main(args);
}
