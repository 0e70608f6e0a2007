#pragma once

#include <stdexcept>
#include <string>

namespace rankatt {

// Error taxonomy maps onto CLI exit codes: DataError -> 3, NumericError -> 4.
// ShapeError signals in-process dimension misuse and is treated as numeric.

class DataError : public std::runtime_error {
 public:
  enum class Kind {
    missing_file,
    corrupt_header,
    corrupt_payload,
    non_finite,
    dim_mismatch,
    bad_record,
    cycle_detected,
    empty_split,
    unknown_id,
    degenerate,
  };

  DataError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rankatt
