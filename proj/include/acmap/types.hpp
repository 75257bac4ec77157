#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace acmap {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

struct Color {
  uint8_t r = 0;
  uint8_t g = 0;
  uint8_t b = 0;

  bool operator==(const Color&) const = default;
};

/// Input that fails to parse (bad syntax, truncated file, wrong magic).
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& file, int line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        file_(file), line_(line) {}
  ParseError(const std::string& file, const std::string& what)
      : std::runtime_error(file + ": " + what), file_(file), line_(0) {}

  const std::string& file() const { return file_; }
  int line() const { return line_; }

private:
  std::string file_;
  int line_;
};

/// Well-formed input that violates a documented constraint.
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace acmap
