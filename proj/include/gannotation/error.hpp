#pragma once

#include <stdexcept>
#include <string>

namespace gannotation {

// Invalid arguments are reported with std::invalid_argument. The two classes
// below cover the remaining failure kinds.

/// A computation reached a state it cannot continue from (e.g. a non-finite loss).
class invalid_state_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A numerical routine failed beyond its tolerance.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gannotation
