#include <string>
#include <vector>

#include "cityq/cityq.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cityq::run_cli(args);
}
