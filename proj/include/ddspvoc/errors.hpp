// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DDSPVOC_ERRORS_HPP_
#define DDSPVOC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ddspvoc {

// Malformed or inconsistent external data: unreadable files, bad magic,
// truncated payloads, mismatched dimensions in serialized inputs.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at runtime: non-finite intermediate values or a
// diverging iteration. Carries enough context to name the failing step.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ddspvoc

#endif  // DDSPVOC_ERRORS_HPP_
