#pragma once

#include <stdexcept>
#include <string>

namespace pcforge {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateMeshError : public Error { using Error::Error; };
class ZeroScaleError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class EmptyMaskError : public Error { using Error::Error; };
class StepError : public Error { using Error::Error; };
class NotVisibleError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace pcforge
