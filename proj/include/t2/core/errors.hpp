#pragma once

#include <stdexcept>
#include <string>

namespace t2 {

// CLI exit codes. Library code throws; tools/t2det_main.cpp maps the
// exception type to the matching code.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitDivergence = 3,
  kExitIo = 4,
};

// Contract violation on an input: bad shape, non-finite values, values
// outside a documented range, unknown config key, ...
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A keyed resource (image id, checkpoint tensor, config key) is absent.
class LookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace t2
