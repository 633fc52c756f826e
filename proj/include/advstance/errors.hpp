#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace advstance {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A record- or file-level validation failure. `line` is 1-based, 0 when the
/// problem is not tied to a line.
class DataError : public Error {
 public:
  DataError(std::string file, std::size_t line, std::string field, std::string message)
      : Error(format(file, line, field, message)),
        file_(std::move(file)),
        line_(line),
        field_(std::move(field)),
        detail_(std::move(message)) {}

  [[nodiscard]] const std::string& file() const { return file_; }
  [[nodiscard]] std::size_t line() const { return line_; }
  [[nodiscard]] const std::string& field() const { return field_; }
  /// The message without the location prefix.
  [[nodiscard]] const std::string& detail() const { return detail_; }

 private:
  static std::string format(const std::string& file, std::size_t line, const std::string& field,
                            const std::string& message) {
    std::string out = file.empty() ? std::string("<input>") : file;
    if (line > 0) out += ":" + std::to_string(line);
    if (!field.empty()) out += " [" + field + "]";
    return out + ": " + message;
  }

  std::string file_;
  std::size_t line_;
  std::string field_;
  std::string detail_;
};

/// Data leaking from the destination topic into a training-side set.
class LeakageError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace advstance
