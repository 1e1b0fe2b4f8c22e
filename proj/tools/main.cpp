#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  return lapis::cli::dispatch(argc, argv, lapis::process_env(), std::cout, std::cerr);
}
