#pragma once

#include <stdexcept>
#include <string>

namespace spam {

//! Raised when an iterative procedure produced non-finite values or a
//! quantity left its valid numeric range. Distinct from input validation
//! errors so callers can map the two onto different exit codes.
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spam
