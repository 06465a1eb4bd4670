#pragma once

#include <stdexcept>
#include <string>

namespace cyclemt {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model, corpus or config file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace cyclemt
