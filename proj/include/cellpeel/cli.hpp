#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cellpeel {

/// Runs one subcommand: mask, peel, rectify, segment2d, track2d, track3d,
/// quantify, phantom or serve. `args` excludes the program name. Failures
/// print `{"error": {...}}` on `err` and return a non-zero status (2 for
/// usage errors, 1 otherwise).
int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// `{"error": {"module": ..., "type": ..., "message": ...}}`
nlohmann::json error_json(const std::exception& e);

}  // namespace cellpeel
