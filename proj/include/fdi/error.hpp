#pragma once

#include <stdexcept>
#include <string>

namespace fdi {

enum class ErrorKind {
  invalid_argument,
  empty_dataset,
  unsplittable,
  parse,
  stale_index,
  over_budget,
  unsatisfiable_state,
  exhausted_stream,
  no_update,
  model,
  remote,
  io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace fdi
