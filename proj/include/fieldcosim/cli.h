#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fieldcosim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSimulation = 3;

// Runs one command line (without the program name). Returns the process exit
// code: 0 success, 2 usage or configuration error, 3 simulation failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fieldcosim
