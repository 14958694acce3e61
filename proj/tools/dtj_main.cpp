#include <vector>

#include "dtj/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dtj::run_cli(args);
}
