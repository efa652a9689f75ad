#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ddfh {

/// Base of every error the engine throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: unknown keys, out-of-range settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;

  DataError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  /// 1-based input line, 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// An internal postcondition failed.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Wraps an error with the pipeline stage that raised it.
class StageError : public Error {
 public:
  enum class Kind { config, data, invariant };

  StageError(std::string stage, Kind kind, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)), kind_(kind) {}

  const std::string& stage() const noexcept { return stage_; }
  Kind kind() const noexcept { return kind_; }

 private:
  std::string stage_;
  Kind kind_;
};

/// Runs `fn`, relabelling any engine error with `stage`.
template <typename Fn>
decltype(auto) with_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw StageError(stage, StageError::Kind::config, e.what());
  } catch (const DataError& e) {
    throw StageError(stage, StageError::Kind::data, e.what());
  } catch (const InvariantError& e) {
    throw StageError(stage, StageError::Kind::invariant, e.what());
  }
}

}  // namespace ddfh
