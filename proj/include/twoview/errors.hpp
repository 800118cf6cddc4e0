#pragma once

#include <stdexcept>
#include <string>

namespace twoview {

// Invalid configuration or malformed request (exit code 2 in the CLI).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing or inconsistent input data (exit code 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training diverged or aborted (exit code 4).
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Test-set leakage detected (exit code 5).
struct AuditError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace twoview
