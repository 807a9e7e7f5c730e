#pragma once

#include <stdexcept>
#include <string>

namespace calmap {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroAreaMask : ValidationError {
  using ValidationError::ValidationError;
};

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OverlappingSupport : ValidationError {
  using ValidationError::ValidationError;
};

struct NonPositiveScale : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonPositiveK : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TooFewInstances : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct PlacementFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyTestSet : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace calmap
