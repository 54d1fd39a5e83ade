#include <string>
#include <vector>

#include "unlearn/cli/run.hpp"

int main(int argc, char** argv) {
    return unlearn::cli::main_entry(std::vector<std::string>(argv, argv + argc));
}
