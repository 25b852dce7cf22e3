#pragma once

#include <iosfwd>
#include <string>

#include "twintune/bo.hpp"

namespace twintune {

/// Append-only JSON-lines campaign journal (one TrialRecord per line).
std::string trial_to_json_line(const TrialRecord& record);
TrialRecord trial_from_json_line(const std::string& line);

std::vector<TrialRecord> read_journal(const std::string& path);

/// Best-so-far value at each trial index.
std::vector<double> best_so_far(const std::vector<TrialRecord>& trials);

}  // namespace twintune
