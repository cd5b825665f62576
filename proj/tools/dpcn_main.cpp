#include <string>
#include <vector>

#include "dpcn/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return dpcn::execute_command(args);
}
