#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ibend/bending.hpp"
#include "ibend/extension.hpp"
#include "ibend/geometry.hpp"

namespace ibend {

/// λ = f_*Z + φη.
struct LambdaSpec {
  std::vector<Expr> z;
  Expr phi;
};

struct TrivialSpec {
  MatrixXd d;
  VectorXd w;
};

/// τ = f_*Z + δ with Z Killing and δ normal to N1.
struct KillingSpec {
  std::vector<Expr> z;
  std::vector<Expr> delta;
};

struct ConeSpec {
  ConeKind kind = ConeKind::Spherical;
  int s_index = 0;  // 0-based chart variable holding s
};

struct SplittingSpec {
  VectorXd start, direction;
  double t_max = 1.0;
  double step = 1e-3;
};

struct ExtensionSpec {
  int points = 20;
  std::vector<double> t = {-0.2, -0.1, 0.0, 0.1, 0.2};
};

struct Sampling {
  int points = 32;
  std::vector<int> grid;
  std::uint64_t seed = 0;
};

struct Tolerances {
  double pointwise = 1e-7;
  double integration = 1e-4;
  double rank = kDefaultRankTol;
};

/// Expected outcome of a check: a status, a value, or both.
struct Expectation {
  std::string status;           // pass | fail | skipped | not-applicable, empty if unset
  std::optional<double> value;  // numeric value (dimensions, ranks, ...)
  std::optional<bool> flag;     // boolean value (triviality, existence)
  double tolerance = 0.0;
};

struct Scene {
  std::string name;
  std::string description;
  ImmersionChart chart;
  BendingField tau;
  std::optional<LambdaSpec> lambda;
  std::vector<std::vector<Expr>> distribution;  // declared line fields spanning D (chart coordinates)
  std::optional<TrivialSpec> trivial;
  std::optional<KillingSpec> killing;
  std::optional<ConeSpec> cone;
  std::optional<SplittingSpec> splitting;
  ExtensionSpec extension;
  Sampling sampling;
  Tolerances tolerances;
  std::vector<std::string> checks;
  std::map<std::string, Expectation> expected;
  std::vector<std::string> tags;

  void add_check(const std::string& nm) {
    for (const auto& c : checks)
      if (c == nm) return;
    checks.push_back(nm);
  }
  void expect_pass(const std::vector<std::string>& names) {
    for (const auto& nm : names) {
      add_check(nm);
      expected[nm].status = "pass";
    }
  }
  void expect_fail(const std::vector<std::string>& names) {
    for (const auto& nm : names) {
      add_check(nm);
      expected[nm].status = "fail";
    }
  }
  void expect_value(const std::string& nm, double v) {
    add_check(nm);
    expected[nm].value = v;
  }
  void expect_flag(const std::string& nm, bool v) {
    add_check(nm);
    expected[nm].flag = v;
  }
  bool has_tag(const std::string& t) const {
    for (const auto& x : tags)
      if (x == t) return true;
    return false;
  }
};

}  // namespace ibend
