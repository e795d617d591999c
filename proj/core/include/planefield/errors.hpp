#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace planefield {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument values: out-of-range pixel, bad disparity range, ...
class DomainError : public Error {
 public:
  using Error::Error;
};

// Mismatched tensor / image dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Degenerate homography or unprojectable geometry.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents; carries the byte offset of the defect.
class FormatError : public IoError {
 public:
  FormatError(const std::string& message, std::size_t byte_offset)
      : IoError(message + " (byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

}  // namespace planefield
