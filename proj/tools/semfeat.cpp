#include <semfeat/cli.hpp>

int main(int argc, char** argv) {
    return semfeat::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
