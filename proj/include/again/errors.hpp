#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace again {

/// Base of every error the library throws.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class parse_error : public error {
 public:
  parse_error(const std::string& file, std::size_t line, const std::string& what)
      : error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class dimension_error : public error { using error::error; };
class shape_error : public error { using error::error; };
class range_error : public error { using error::error; };
class capacity_error : public error { using error::error; };
class validation_error : public error { using error::error; };
class numeric_error : public error { using error::error; };
class config_error : public error { using error::error; };
class version_error : public error { using error::error; };
class io_error : public error { using error::error; };
class data_error : public error { using error::error; };

}  // namespace again
