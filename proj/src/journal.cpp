#include "twintune/journal.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace twintune {

namespace {

using json = nlohmann::ordered_json;

json vec_to_json(const VecX& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

VecX vec_from_json(const json& arr) {
  VecX v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

}  // namespace

std::string trial_to_json_line(const TrialRecord& record) {
  json j;
  j["index"] = record.index;
  j["phase"] = record.phase;
  j["theta"] = vec_to_json(record.theta_raw);
  j["theta_unit"] = vec_to_json(record.theta_unit);
  j["y"] = record.y;
  j["metrics"] = {{"avg_error", record.metrics.avg_error},
                  {"max_error", record.metrics.max_error},
                  {"accumulated_cost", record.metrics.accumulated_cost},
                  {"mean_solve_time", record.metrics.mean_solve_time},
                  {"mean_iterations", record.metrics.mean_iterations},
                  {"realtime_violations", record.metrics.realtime_violations},
                  {"failed", record.metrics.failed}};
  j["timestamp"] = record.timestamp;
  return j.dump();
}

TrialRecord trial_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  TrialRecord rec;
  rec.index = j.at("index").get<int>();
  rec.phase = j.at("phase").get<std::string>();
  rec.theta_raw = vec_from_json(j.at("theta"));
  rec.theta_unit = vec_from_json(j.at("theta_unit"));
  rec.y = j.at("y").get<double>();
  const json& m = j.at("metrics");
  rec.metrics.avg_error = m.at("avg_error").get<double>();
  rec.metrics.max_error = m.at("max_error").get<double>();
  rec.metrics.accumulated_cost = m.at("accumulated_cost").get<double>();
  rec.metrics.mean_solve_time = m.at("mean_solve_time").get<double>();
  rec.metrics.mean_iterations = m.at("mean_iterations").get<double>();
  rec.metrics.realtime_violations = m.at("realtime_violations").get<int>();
  rec.metrics.failed = m.at("failed").get<bool>();
  rec.timestamp = j.at("timestamp").get<int64_t>();
  return rec;
}

std::vector<TrialRecord> read_journal(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open journal: " + path);
  std::vector<TrialRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(trial_from_json_line(line));
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed journal line (" + e.what() + ")");
    }
  }
  return out;
}

std::vector<double> best_so_far(const std::vector<TrialRecord>& trials) {
  std::vector<double> out;
  out.reserve(trials.size());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : trials) {
    best = std::min(best, t.y);
    out.push_back(best);
  }
  return out;
}

}  // namespace twintune
