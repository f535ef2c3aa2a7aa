#pragma once

#include <stdexcept>
#include <string>

namespace stagewise {

/// Base class of every exception thrown by the library.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (CSV/ARFF/result matrix).
class parse_error : public error {
  public:
    using error::error;
};

/// A precondition on an argument was violated (bad id, out-of-range index, ...).
class invalid_argument : public error {
  public:
    using error::error;
};

/// A cooperative deadline lapsed while work was in progress.
class timeout_error : public error {
  public:
    timeout_error() : error("deadline exceeded") {}
};

}  // namespace stagewise
