#include "nmtwp/cli.hpp"

int main(int argc, char** argv) {
  return nmtwp::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
