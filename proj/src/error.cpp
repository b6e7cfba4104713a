#include "docre/error.hpp"

namespace docre {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Config: return "config";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Ingest: return "ingest";
    case ErrorKind::GraphBuild: return "graph-build";
    case ErrorKind::Label: return "label";
    case ErrorKind::Eval: return "eval";
    case ErrorKind::Train: return "train";
    case ErrorKind::Invariant: return "invariant";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace docre
