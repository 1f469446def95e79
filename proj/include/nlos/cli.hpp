#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nlos/sim.hpp"

namespace nlos::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitDegraded = 3;

inline constexpr const char* kToolVersion = "0.1.0";

// "abs:<meters>" or "sigma:<k>".
NoiseBoundPolicy parse_nu(const std::string& text);
// Comma-separated key=value list: sigma=<m>, db=<dB>, bias=<lo>:<hi>, frac=<p>.
NoiseModel parse_noise(const std::string& text);

// Full command line including the program name in args[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nlos::cli
