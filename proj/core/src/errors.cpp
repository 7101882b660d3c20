#include "biastransfer/errors.hpp"

namespace bt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::channel: return "channel";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::contract: return "contract";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::data: return "data";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::dimension: return 4;
    case ErrorKind::channel: return 5;
    case ErrorKind::contract: return 6;
    case ErrorKind::numeric: return 7;
    case ErrorKind::data: return 8;
  }
  return 1;
}

}  // namespace bt
