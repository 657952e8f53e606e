#pragma once

#include <stdexcept>
#include <string>

namespace igsel {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument or configuration value was violated.
class SpecificationError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class EncodingError : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
public:
  TrainingError(const std::string& what, std::size_t epoch, double last_loss)
      : Error(what), epoch_(epoch), last_loss_(last_loss) {}

  std::size_t epoch() const noexcept { return epoch_; }
  double last_loss() const noexcept { return last_loss_; }

private:
  std::size_t epoch_;
  double last_loss_;
};

class AttributionError : public Error {
public:
  AttributionError(const std::string& what, std::size_t sample)
      : Error(what), sample_(sample) {}
  std::size_t sample() const noexcept { return sample_; }

private:
  std::size_t sample_;
};

class ClusteringError : public Error {
public:
  using Error::Error;
};

class SurrogateError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Wraps a failure inside one pipeline stage.
class StageError : public Error {
public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

}  // namespace igsel
