#pragma once

#include <stdexcept>
#include <string>

namespace deepiqa {

/// Raised for malformed inputs, contract violations and unreadable data.
/// The CLI maps it to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace deepiqa
