#pragma once

#include <string>

#include <json.hpp>

#include "ibend/scene_io.hpp"
#include "ibend/verify.hpp"

namespace ibend {

inline constexpr const char* kReportSchema = "ibend-report/1";
inline constexpr const char* kToolVersion = "0.1.0";

inline nlohmann::ordered_json check_to_json(const CheckRecord& c) {
  using json = nlohmann::ordered_json;
  auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
  json j;
  j["name"] = c.name;
  j["status"] = c.status;
  j["observed"] = c.outcome;
  j["expected"] = c.expected ? expectation_to_json(*c.expected) : json(nullptr);
  j["residual"] = opt(c.residual);
  j["tolerance"] = opt(c.tolerance);
  j["worst_point"] = opt(c.worst_point);
  j["value"] = opt(c.value);
  j["flag"] = opt(c.flag);
  j["details"] = c.details;
  return j;
}

/// Report document; `wall_time_s` is always the last key so that it can be stripped for comparisons.
inline nlohmann::ordered_json make_report(const Scene& scene, const RunResult& res, const RunConfig& cfg) {
  using json = nlohmann::ordered_json;
  json j;
  j["schema"] = kReportSchema;
  j["tool"] = {{"name", "ibend"}, {"version", kToolVersion}};
  j["scene"] = scene_to_json(scene);
  j["config"] = {{"seed", res.seed},
                 {"samples", res.samples},
                 {"points", res.points.size()},
                 {"strict", cfg.strict},
                 {"tolerances",
                  {{"pointwise", res.tolerances.pointwise}, {"integration", res.tolerances.integration}, {"rank", res.tolerances.rank}}}};
  j["checks"] = json::array();
  int counts[4] = {0, 0, 0, 0};
  for (const auto& c : res.checks) {
    j["checks"].push_back(check_to_json(c));
    if (c.status == "pass") ++counts[0];
    else if (c.status == "fail") ++counts[1];
    else if (c.status == "skipped") ++counts[2];
    else ++counts[3];
  }
  j["summary"] = {{"ok", res.ok()},
                  {"pass", counts[0]},
                  {"fail", counts[1]},
                  {"skipped", counts[2]},
                  {"not_applicable", counts[3]},
                  {"mismatches", res.mismatches},
                  {"strict_issues", res.strict_issues}};
  j["wall_time_s"] = res.wall_time_s;
  return j;
}

/// Report text without the wall-time field.
inline std::string report_fingerprint(nlohmann::ordered_json report) {
  report.erase("wall_time_s");
  return report.dump();
}

}  // namespace ibend
