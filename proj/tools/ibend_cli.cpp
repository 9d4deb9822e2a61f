#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ibend/catalog.hpp"
#include "ibend/report.hpp"
#include "ibend/scene_io.hpp"
#include "ibend/verify.hpp"

namespace {

enum Exit { kOk = 0, kMismatch = 1, kUsage = 2, kNumeric = 3 };

int fail(int code, const std::string& kind, const std::string& message, const std::optional<std::string>& pointer = std::nullopt) {
  nlohmann::ordered_json e;
  e["error"] = {{"kind", kind}, {"message", message}};
  if (pointer) e["error"]["pointer"] = *pointer;
  std::cerr << e.dump() << "\n";
  return code;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct VerifyArgs {
  std::string scene;
  std::string report;
  std::string checks;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  bool strict = false;
  bool quiet = false;
};

int run_verify(const VerifyArgs& a) {
  ibend::Scene scene;
  try {
    if (!std::filesystem::exists(a.scene)) return fail(kUsage, "io", "scene file '" + a.scene + "' does not exist");
    scene = ibend::load_scene(a.scene);
  } catch (const ibend::SceneError& e) {
    return fail(kUsage, "validation", e.message(), e.pointer());
  } catch (const std::exception& e) {
    return fail(kUsage, "io", e.what());
  }
  ibend::RunConfig cfg;
  if (!a.checks.empty()) {
    cfg.checks = split_list(a.checks);
    for (const auto& c : *cfg.checks)
      if (!ibend::is_check_name(c)) return fail(kUsage, "usage", "unknown check '" + c + "'");
  }
  if (a.samples && *a.samples < 0) return fail(kUsage, "usage", "--samples must be nonnegative");
  if (a.tol && !(*a.tol > 0.0)) return fail(kUsage, "usage", "--tol-pointwise must be positive");
  cfg.samples = a.samples;
  cfg.seed = a.seed;
  cfg.tol_pointwise = a.tol;
  cfg.strict = a.strict;

  ibend::RunResult res;
  try {
    res = ibend::run_verification(scene, cfg);
  } catch (const ibend::NumericFailure& e) {
    return fail(kNumeric, "numeric", e.what());
  } catch (const ibend::Error& e) {
    return fail(kUsage, "validation", e.what());
  }
  auto report = ibend::make_report(scene, res, cfg);
  if (!a.report.empty()) {
    std::ofstream out(a.report);
    if (!out) return fail(kUsage, "io", "cannot write report '" + a.report + "'");
    out << report.dump(2) << "\n";
  }
  if (!a.quiet) {
    for (const auto& c : res.checks) {
      std::cout << (c.status == "pass" ? "  ok   " : c.status == "fail" ? "  FAIL " : "  --   ") << c.name << " [" << c.outcome << "]";
      if (c.residual) std::cout << " residual=" << *c.residual;
      if (c.value) std::cout << " value=" << *c.value;
      if (c.flag) std::cout << " flag=" << (*c.flag ? "true" : "false");
      std::cout << "\n";
    }
    for (const auto& s : res.strict_issues) std::cout << "  strict: " << s << "\n";
    std::cout << scene.name << ": " << (res.ok() ? "all checks match" : std::to_string(res.mismatches) + " mismatch(es)") << "\n";
  }
  return res.ok() ? kOk : kMismatch;
}

int run_export(const std::string& name, const std::string& dir) {
  std::vector<ibend::Scene> scenes;
  try {
    if (name == "all") scenes = ibend::catalog::all();
    else scenes.push_back(ibend::catalog::by_name(name));
  } catch (const ibend::Error& e) {
    return fail(kUsage, "usage", e.what());
  }
  for (const auto& s : scenes) {
    std::string text = ibend::scene_to_json(s).dump(2) + "\n";
    if (dir.empty()) {
      std::cout << text;
      continue;
    }
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / (s.name + ".json"));
    if (!out) return fail(kUsage, "io", "cannot write into '" + dir + "'");
    out << text;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical verification of infinitesimal bendings of submanifolds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ibend::kToolVersion));

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run the checks of a scene file");
  verify->add_option("scene", va.scene, "Scene JSON file")->required();
  verify->add_option("--report", va.report, "Write the JSON report here");
  verify->add_option("--checks", va.checks, "Comma separated list of checks to run");
  verify->add_option("--samples", va.samples, "Number of random sample points (in addition to the box center)");
  verify->add_option("--seed", va.seed, "Sampling seed");
  verify->add_option("--tol-pointwise", va.tol, "Pointwise residual tolerance");
  verify->add_flag("--strict", va.strict, "Require a one-to-one match of expectations and executed checks");
  verify->add_flag("-q,--quiet", va.quiet, "Only set the exit code");

  std::string ex_name = "all", ex_dir;
  auto* exp = app.add_subcommand("export", "Write catalog scenes as JSON");
  exp->add_option("name", ex_name, "Scene name or 'all'");
  exp->add_option("-o,--out", ex_dir, "Output directory (default: stdout)");

  auto* list = app.add_subcommand("list", "List catalog scenes and checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "usage", e.what());
  }

  if (*verify) return run_verify(va);
  if (*exp) return run_export(ex_name, ex_dir);
  if (*list) {
    std::cout << "scenes:\n";
    for (const auto& e : ibend::catalog::entries()) std::cout << "  " << e.name << "\n";
    std::cout << "checks:\n";
    for (const auto& c : ibend::check_names()) std::cout << "  " << c << "\n";
    return kOk;
  }
  return kUsage;
}
