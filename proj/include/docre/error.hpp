#pragma once

#include <stdexcept>
#include <string>

namespace docre {

enum class ErrorKind {
  Dimension,
  Numeric,
  Config,
  Parse,
  Ingest,
  GraphBuild,
  Label,
  Eval,
  Train,
  Invariant,
  Precondition,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

// Every library failure is reported through this type; `kind` drives CLI
// exit codes and lets tests assert on the failure category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace docre
