#pragma once

#include <stdexcept>
#include <string>

namespace fieldcosim {

// Malformed or inconsistent input documents, unreadable files, bad flags.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A unit or a run failed while simulating. The CLI maps this to exit code 3.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fieldcosim
