#pragma once

#include <stdexcept>
#include <string>

namespace pmap {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but cannot be processed (e.g. a zero row).
class DegenerateInput : public Error {
 public:
  DegenerateInput(const std::string& what, long index = -1) : Error(what), index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// A degree entry was not strictly positive: the kernel graph is
/// disconnected at this bandwidth or the series truncation went negative.
class DisconnectedError : public Error {
 public:
  DisconnectedError(const std::string& what, long index) : Error(what), index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

inline void require_size(long got, long expected, const char* what) {
  if (got != expected)
    throw DimensionMismatch(std::string(what) + ": expected length " + std::to_string(expected) +
                            ", got " + std::to_string(got));
}

} // namespace pmap
