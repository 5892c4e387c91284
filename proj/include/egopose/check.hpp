#pragma once

#include <stdexcept>
#include <string>

namespace egopose {

[[noreturn]] inline void fail_check(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace egopose

// Contract check for user-facing preconditions. Throws std::invalid_argument.
#define EGOPOSE_CHECK(cond, msg)         \
  do {                                   \
    if (!(cond)) ::egopose::fail_check(msg); \
  } while (0)
