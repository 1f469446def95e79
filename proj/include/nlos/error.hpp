#pragma once

#include <stdexcept>
#include <string>

namespace nlos {

// Raised for malformed or contract-violating inputs anywhere in the library.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace nlos
