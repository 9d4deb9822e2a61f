#include <catch_amalgamated.hpp>

#include <string>

#include "ibend/catalog.hpp"
#include "ibend/report.hpp"
#include "ibend/scene_io.hpp"
#include "ibend/verify.hpp"

using namespace ibend;
using json = nlohmann::json;

namespace {

std::string pointer_of(const json& j) {
  try {
    scene_from_json(j);
  } catch (const SceneError& e) {
    return e.pointer();
  }
  return "<accepted>";
}

json base_scene() { return json::parse(scene_to_json(catalog::cylinder_bending(3)).dump()); }

}  // namespace

TEST_CASE("scene JSON round-trips", "[report]") {
  for (const auto& s : catalog::all()) {
    INFO(s.name);
    std::string first = scene_to_json(s).dump();
    Scene back = scene_from_text(first);
    CHECK(scene_to_json(back).dump() == first);
  }
}

TEST_CASE("scene validation reports JSON pointers", "[report]") {
  CHECK(pointer_of(base_scene()) == "<accepted>");

  json j = base_scene();
  j["tau"].erase(j["tau"].size() - 1);
  CHECK(pointer_of(j) == "/tau");

  j = base_scene();
  j["bogus"] = 1;
  CHECK(pointer_of(j) == "/bogus");

  j = base_scene();
  j["chart_box"][1] = {1.0, 0.0};
  CHECK(pointer_of(j) == "/chart_box/1");

  j = base_scene();
  j["f"][0] = "(sin x9)";
  CHECK(pointer_of(j).rfind("/f/0", 0) == 0);

  j = base_scene();
  j.erase("n");
  CHECK(pointer_of(j) == "/n");

  j = base_scene();
  j["n"] = "three";
  CHECK(pointer_of(j) == "/n");

  j = base_scene();
  j["ambient_signature"] = 2;
  CHECK(pointer_of(j) == "/ambient_signature");

  j = base_scene();
  j["schema"] = "other/2";
  CHECK(pointer_of(j) == "/schema");

  CHECK_THROWS_AS(scene_from_text("{not json"), SceneError);
  CHECK_THROWS_AS(scene_from_text("[1, 2]"), SceneError);
}

TEST_CASE("reports are deterministic for a fixed seed", "[report]") {
  Scene s = catalog::cylinder_rotation(4);
  RunConfig cfg;
  cfg.samples = 8;
  cfg.seed = 1234;
  auto a = make_report(s, run_verification(s, cfg), cfg);
  auto b = make_report(s, run_verification(s, cfg), cfg);
  CHECK(report_fingerprint(a) == report_fingerprint(b));
  CHECK(a.items().begin().key() == "schema");
  CHECK((--a.end()).key() == "wall_time_s");
  CHECK(a["config"]["points"] == 9);

  cfg.seed = 99;
  RunResult other = run_verification(s, cfg);
  RunResult first = run_verification(s, RunConfig{std::nullopt, 8, 1234, std::nullopt, false});
  CHECK(other.points[0] == first.points[0]);  // box center
  CHECK(other.points[1] != first.points[1]);
}

TEST_CASE("sample points stay inside the shrunken box", "[report]") {
  Scene s = catalog::killing_normal(4);
  auto pts = sample_points(s.chart, s.sampling, 50);
  REQUIRE(pts.size() == 51);
  CHECK(pts[0] == s.chart.center());
  for (const auto& p : pts)
    for (int i = 0; i < 4; ++i) {
      double w = s.chart.box[i].hi - s.chart.box[i].lo;
      CHECK(p[i] >= s.chart.box[i].lo + 0.02 * w - 1e-15);
      CHECK(p[i] <= s.chart.box[i].hi - 0.02 * w + 1e-15);
    }
}

TEST_CASE("check subsets report only the requested checks", "[report]") {
  Scene s = catalog::cylinder_bending(4);
  RunConfig cfg;
  cfg.checks = std::vector<std::string>{"moore_theta"};
  RunResult r = run_verification(s, cfg);
  REQUIRE(r.checks.size() == 1);
  CHECK(r.checks[0].name == "moore_theta");
  CHECK(r.checks[0].status == "pass");
  CHECK(r.ok());

  // a failing prerequisite skips the dependent check
  Scene neg = catalog::cylinder_negative();
  RunResult rn = run_verification(neg, cfg);
  REQUIRE(rn.find("moore_theta") != nullptr);
  CHECK(rn.find("moore_theta")->outcome == "skipped");

  cfg.checks = std::vector<std::string>{"no_such_check"};
  CHECK_THROWS_AS(run_verification(s, cfg), PreconditionError);
}

TEST_CASE("strict mode pairs expectations with executed checks", "[report]") {
  Scene s = catalog::cylinder_bending(4);
  RunConfig cfg;
  cfg.checks = std::vector<std::string>{"bending"};
  CHECK(run_verification(s, cfg).ok());
  cfg.strict = true;
  RunResult r = run_verification(s, cfg);
  CHECK_FALSE(r.ok());
  CHECK_FALSE(r.strict_issues.empty());

  RunConfig full;
  full.strict = true;
  CHECK(run_verification(s, full).ok());
}

TEST_CASE("a failed expectation is a mismatch", "[report]") {
  Scene s = catalog::cylinder_bending(4);
  s.expect_value("nullity", 1);
  RunConfig cfg;
  cfg.checks = std::vector<std::string>{"nullity"};
  RunResult r = run_verification(s, cfg);
  CHECK(r.mismatches == 1);
  CHECK(r.find("nullity")->status == "fail");
  auto rep = make_report(s, r, cfg);
  CHECK(rep["summary"]["ok"] == false);
  CHECK(rep["checks"].size() == r.checks.size());
}
