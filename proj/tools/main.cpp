#include "itl_pursuit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return itl_pursuit::run_cli(args, std::cout, std::cerr);
}
