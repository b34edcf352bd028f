#pragma once

#include <stdexcept>
#include <string>

namespace genviews {

// Error taxonomy. The CLI maps ConfigError-family exceptions to exit code 2
// and runtime/training failures to exit code 3.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid distribution / generator / architecture parameters.
struct InvalidSpecError : ConfigError {
  using ConfigError::ConfigError;
};

// A call violated an operation's precondition (shape mismatch, missing labels, ...).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Value outside its mathematical domain (alpha out of range, K=0, ...).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation requires state that was never established (untrained walkset, ...).
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A batch that no objective can consume (e.g. supcon with no positive pairs).
struct DegenerateBatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss or other optimization breakdown; carries the iteration index.
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& what, long iteration = -1)
      : std::runtime_error(what), iteration(iteration) {}
  long iteration;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace genviews
