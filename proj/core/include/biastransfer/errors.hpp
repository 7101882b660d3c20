#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bt {

// Error classes map one-to-one onto CLI exit codes.
enum class ErrorKind {
  dimension,
  channel,
  config,
  io,
  contract,
  numeric,
  data,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(ErrorKind::dimension, what) {}
};

class ChannelError : public Error {
 public:
  explicit ChannelError(const std::string& what) : Error(ErrorKind::channel, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::contract, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Process exit code used by the CLI for an error class. 0 is success, 1 is
/// reserved for unclassified failures.
int exit_code(ErrorKind kind);

}  // namespace bt
