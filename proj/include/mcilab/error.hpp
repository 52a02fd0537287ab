#pragma once

#include <stdexcept>
#include <string>

namespace mcilab {

enum class Errc {
  invalid_definition,
  invalid_state,
  invalid_input,
  invalid_argument,
  state_space_too_large,
  multiple_assignment,
  dimension_mismatch,
  non_hermitian,
  zero_overlap,
  non_monotone,
  unstable,
  parse_error,
  schema_error,
  dangling_reference,
  io_error,
};

inline const char* to_string(Errc c) {
  switch (c) {
    case Errc::invalid_definition: return "invalid_definition";
    case Errc::invalid_state: return "invalid_state";
    case Errc::invalid_input: return "invalid_input";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::state_space_too_large: return "state_space_too_large";
    case Errc::multiple_assignment: return "multiple_assignment";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::non_hermitian: return "non_hermitian";
    case Errc::zero_overlap: return "zero_overlap";
    case Errc::non_monotone: return "non_monotone";
    case Errc::unstable: return "unstable";
    case Errc::parse_error: return "parse_error";
    case Errc::schema_error: return "schema_error";
    case Errc::dangling_reference: return "dangling_reference";
    case Errc::io_error: return "io_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  Errc code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

}  // namespace mcilab
