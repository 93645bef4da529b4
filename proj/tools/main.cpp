#include "cli.hpp"

int main(int argc, char** argv) {
  return adaptherm::cli::run({argv + 1, argv + argc});
}
