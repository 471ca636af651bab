#include <string>
#include <vector>

#include "wdn/cli.hpp"

int main(int argc, char** argv) {
    return wdn::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
