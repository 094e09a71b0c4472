#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace covnet {

// Error categories map onto CLI exit codes (parse/validation -> 2, io -> 4).
enum class ErrorKind { parse, validation, io, config };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace covnet
