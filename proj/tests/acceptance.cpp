// Prints one line per acceptance criterion; exits non-zero if any fails.
#include <iostream>

#include "stablesim/verify.hpp"

int main() {
  stablesim::VerifyOptions options;
  return stablesim::cmd_verify(options, std::cout);
}
