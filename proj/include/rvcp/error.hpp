#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rvcp {

enum class ErrorKind {
  invalid_argument,
  domain_error,
  degenerate_g,
  all_zero_variance,
  empty_population,
  insufficient_calibration,
  missing_labels,
  missing_sample,
  shape_mismatch,
  parse_error,
  header_mismatch,
  io_error,
};

std::string_view to_string(ErrorKind kind);

/// Statistical preconditions (exit code 3 at the CLI) as opposed to bad input.
bool is_statistical(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rvcp
