#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hypcbc {

// Error kinds map 1:1 onto process exit codes and C API status values.
enum class ErrorCode : int {
  Internal = 1,
  Config = 2,
  Data = 3,
  Numeric = 4,
  Usage = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  int status() const noexcept { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_config(std::string msg) {
  throw Error(ErrorCode::Config, std::move(msg));
}
[[noreturn]] inline void throw_data(std::string msg) {
  throw Error(ErrorCode::Data, std::move(msg));
}
[[noreturn]] inline void throw_numeric(std::string msg) {
  throw Error(ErrorCode::Numeric, std::move(msg));
}
[[noreturn]] inline void throw_usage(std::string msg) {
  throw Error(ErrorCode::Usage, std::move(msg));
}

}  // namespace hypcbc
