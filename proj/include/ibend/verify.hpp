#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ibend/bending.hpp"
#include "ibend/extension.hpp"
#include "ibend/flat_forms.hpp"
#include "ibend/geometry.hpp"
#include "ibend/scene.hpp"

namespace ibend {

/// Every check in execution order.
inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = {
      "frame_regularity",   "gauss_equation",        "codazzi_equation",
      "nullity",            "bending",               "first_order_isometry",
      "b_t_derivative",     "identity_parte",        "identity_der_gauss",
      "identity_casi_codazzi", "identity_segder_l",  "triviality",
      "killing_normal",     "flatness_theta",        "moore_theta",
      "regular_rank_theta", "delta_star",            "flatness_theta_hat",
      "main_decomposition_theta_hat", "isotropic_pair", "condition_star",
      "condition_star_n1_perp", "l_bar_skew",        "flatness_varphi",
      "varphi_kernel_bound", "varphi_kernel_alpha_r", "impext_identity",
      "requisito",          "singular_extension",    "trivial_extension",
      "ruling_nullity",     "ruling_delta_star",     "ruling_declared",
      "splitting_riccati",  "cone_consistency"};
  return names;
}

inline bool is_check_name(const std::string& s) {
  const auto& v = check_names();
  return std::find(v.begin(), v.end(), s) != v.end();
}

inline const std::map<std::string, std::vector<std::string>>& check_prerequisites() {
  static const std::map<std::string, std::vector<std::string>> m = {
      {"moore_theta", {"flatness_theta"}},
      {"triviality", {"bending"}},
      {"main_decomposition_theta_hat", {"flatness_theta_hat"}},
      {"condition_star", {"bending"}},
      {"condition_star_n1_perp", {"condition_star"}},
      {"l_bar_skew", {"condition_star"}},
      {"flatness_varphi", {"condition_star"}},
      {"varphi_kernel_bound", {"condition_star"}},
      {"varphi_kernel_alpha_r", {"condition_star"}},
      {"impext_identity", {"condition_star"}},
      {"requisito", {"condition_star"}},
      {"singular_extension", {"requisito"}},
      {"trivial_extension", {"bending"}},
      {"ruling_delta_star", {"bending"}},
      {"splitting_riccati", {"bending"}},
  };
  return m;
}

struct RunConfig {
  std::optional<std::vector<std::string>> checks;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol_pointwise;
  bool strict = false;
};

struct CheckRecord {
  std::string name;
  std::string outcome = "pass";  // raw: pass | fail | skipped | not-applicable
  std::string status;            // after matching against the expectation
  std::optional<double> residual, tolerance, value;
  std::optional<bool> flag;
  std::optional<std::vector<double>> worst_point;
  std::optional<Expectation> expected;
  bool matched = true;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
};

struct RunResult {
  std::vector<std::vector<double>> points;
  std::vector<CheckRecord> checks;
  std::vector<std::string> strict_issues;
  int mismatches = 0;
  std::uint64_t seed = 0;
  int samples = 0;
  Tolerances tolerances;
  double wall_time_s = 0.0;

  bool ok() const { return mismatches == 0 && strict_issues.empty(); }
  const CheckRecord* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// Box center followed by `count` uniform points in the box shrunk by 2% per side, or a tensor grid.
inline std::vector<std::vector<double>> sample_points(const ImmersionChart& chart, const Sampling& s, int count) {
  const int n = chart.n;
  std::vector<std::vector<double>> out;
  auto inner = [&](int i) {
    double w = chart.box[i].hi - chart.box[i].lo;
    return Interval{chart.box[i].lo + 0.02 * w, chart.box[i].hi - 0.02 * w};
  };
  if (!s.grid.empty()) {
    if (static_cast<int>(s.grid.size()) != n) throw PreconditionError("grid needs one count per chart variable");
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    while (true) {
      std::vector<double> x(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        Interval iv = inner(i);
        int g = s.grid[i];
        x[i] = g <= 1 ? 0.5 * (iv.lo + iv.hi) : iv.lo + (iv.hi - iv.lo) * idx[i] / (g - 1);
      }
      out.push_back(std::move(x));
      int k = 0;
      while (k < n && ++idx[k] >= std::max(1, s.grid[k])) idx[k++] = 0;
      if (k == n) break;
    }
    return out;
  }
  out.push_back(chart.center());
  Rng rng(s.seed);
  for (int c = 0; c < count; ++c) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      Interval iv = inner(i);
      x[i] = rng.uniform(iv.lo, iv.hi);
    }
    out.push_back(std::move(x));
  }
  return out;
}

namespace detail {

/// Running maximum that remembers the sample index; NaN always wins.
struct Worst {
  double v = 0.0;
  int k = -1;
  void take(double x, int idx) {
    if (k < 0 || !(x <= v)) {
      v = x;
      k = idx;
    }
  }
};

struct StarData {
  StarPoint sp;
  std::optional<StarField> field;
  std::optional<LBar> lbar;
  std::optional<LambdaJet> lambda;
  std::optional<FormTable> phi;
};

inline bool expectation_matches(const CheckRecord& r, const Expectation& e) {
  if (!e.status.empty() && e.status != r.outcome) return false;
  if (e.value && (!r.value || !(std::abs(*r.value - *e.value) <= e.tolerance))) return false;
  if (e.flag && (!r.flag || *r.flag != *e.flag)) return false;
  return true;
}

class Runner {
 public:
  Runner(const Scene& scene, const RunConfig& cfg) : scene_(scene), cfg_(cfg) {
    tol_ = scene.tolerances;
    if (cfg.tol_pointwise) tol_.pointwise = *cfg.tol_pointwise;
    seed_ = cfg.seed ? *cfg.seed : scene.sampling.seed;
    Sampling s = scene.sampling;
    s.seed = seed_;
    if (cfg.samples) s.grid.clear();
    samples_ = cfg.samples ? *cfg.samples : s.points;
    pts_ = sample_points(scene.chart, s, samples_);
    const std::size_t np = pts_.size();
    frames_.resize(np);
    jets_.resize(np);
    thetas_.resize(np);
    stars_.resize(np);
  }

  RunResult run() {
    auto t0 = std::chrono::steady_clock::now();
    RunResult res;
    res.points = pts_;
    res.seed = seed_;
    res.samples = samples_;
    res.tolerances = tol_;
    std::vector<std::string> requested = cfg_.checks ? *cfg_.checks : scene_.checks;
    if (requested.empty()) requested = check_names();
    std::set<std::string> want(requested.begin(), requested.end());
    for (const auto& name : check_names()) {
      if (!want.count(name)) continue;
      CheckRecord r = evaluate(name);
      auto it = scene_.expected.find(name);
      if (it != scene_.expected.end()) {
        r.expected = it->second;
        r.matched = expectation_matches(r, it->second);
        r.status = r.matched ? "pass" : "fail";
        if (!r.matched) ++res.mismatches;
      } else {
        r.status = r.outcome;
        if (r.outcome == "fail") ++res.mismatches;
      }
      res.checks.push_back(std::move(r));
    }
    if (cfg_.strict) {
      for (const auto& [name, e] : scene_.expected) {
        const CheckRecord* c = res.find(name);
        if (!c || c->outcome == "skipped" || c->outcome == "not-applicable")
          res.strict_issues.push_back("expectation for '" + name + "' has no executed check");
      }
      for (const auto& c : res.checks)
        if ((c.outcome == "pass" || c.outcome == "fail") && !scene_.expected.count(c.name))
          res.strict_issues.push_back("check '" + c.name + "' has no expectation");
    }
    res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  }

  /// Raw outcome of a check, memoized; prerequisites are evaluated on demand.
  const CheckRecord& evaluate(const std::string& name) {
    auto it = done_.find(name);
    if (it != done_.end()) return it->second;
    CheckRecord r;
    r.name = name;
    std::vector<std::string> pre;
    if (name != "frame_regularity") pre.push_back("frame_regularity");
    auto pit = check_prerequisites().find(name);
    if (pit != check_prerequisites().end()) pre.insert(pre.end(), pit->second.begin(), pit->second.end());
    for (const auto& p : pre) {
      const CheckRecord& pr = evaluate(p);
      if (pr.outcome != "pass") {
        r.outcome = "skipped";
        r.details["reason"] = "prerequisite '" + p + "' did not pass";
        return done_[name] = r;
      }
    }
    try {
      dispatch(name, r);
    } catch (const PreconditionError& e) {
      r.outcome = "fail";
      r.details["error"] = e.what();
    } catch (const DomainError& e) {
      r.outcome = "fail";
      r.details["error"] = e.what();
    }
    return done_[name] = r;
  }

 private:
  const Scene& scene_;
  RunConfig cfg_;
  Tolerances tol_;
  std::uint64_t seed_ = 0;
  int samples_ = 0;
  std::vector<std::vector<double>> pts_;
  std::vector<std::optional<PointFrame>> frames_;
  std::vector<std::optional<BendingJet>> jets_;
  std::vector<std::optional<ThetaData>> thetas_;
  std::vector<std::optional<StarData>> stars_;
  std::map<std::string, CheckRecord> done_;

  int count() const { return static_cast<int>(pts_.size()); }
  const PointFrame& frame(int k) { return *frames_[k]; }
  const BendingJet& jet(int k) {
    if (!jets_[k]) jets_[k] = bending_jet_at(frame(k), scene_.tau);
    return *jets_[k];
  }
  const ThetaData& theta(int k) {
    if (!thetas_[k]) thetas_[k] = build_theta(frame(k), jet(k), tol_.rank);
    return *thetas_[k];
  }
  StarData& star(int k) {
    if (!stars_[k]) {
      StarData d;
      d.sp = solve_condition_star_at(frame(k), jet(k), nullptr, tol_.rank);
      stars_[k] = std::move(d);
    }
    return *stars_[k];
  }
  /// Full L̄ data at a point where (*) was found.
  StarData& star_full(int k) {
    StarData& d = star(k);
    if (!d.lbar) {
      d.field = star_field_at(frame(k), jet(k), d.sp, tol_.rank);
      d.lbar = extend_l_bar(frame(k), jet(k), *d.field);
    }
    return d;
  }
  const FormTable& phi(int k) {
    StarData& d = star_full(k);
    if (!d.phi) d.phi = build_varphi(frame(k), jet(k), *d.lbar);
    return *d.phi;
  }
  const LambdaJet& lambda(int k) {
    StarData& d = star_full(k);
    if (!d.lambda) d.lambda = lambda_at(frame(k), jet(k), *d.lbar, scene_.lambda->z, scene_.lambda->phi);
    return *d.lambda;
  }

  void not_applicable(CheckRecord& r, const std::string& why) {
    r.outcome = "not-applicable";
    r.details["reason"] = why;
  }

  void finish(CheckRecord& r, const Worst& w, double tol) {
    r.residual = w.k < 0 ? 0.0 : w.v;
    r.tolerance = tol;
    if (w.k >= 0) r.worst_point = pts_[w.k];
    r.outcome = (*r.residual <= tol) ? "pass" : "fail";
  }

  /// Max of a pointwise quantity over all samples, compared to tol.
  void pointwise(CheckRecord& r, double tol, const std::function<double(int)>& f) {
    Worst w;
    for (int k = 0; k < count(); ++k) w.take(f(k), k);
    finish(r, w, tol);
  }

  /// Integer quantity required to be constant over the samples; value is the center value.
  void constant_dim(CheckRecord& r, const std::function<int(int)>& f) {
    int lo = 1 << 30, hi = -1;
    for (int k = 0; k < count(); ++k) {
      int v = f(k);
      if (k == 0) r.value = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (v != static_cast<int>(*r.value) && !r.worst_point) r.worst_point = pts_[k];
    }
    r.details["min"] = lo;
    r.details["max"] = hi;
    r.outcome = lo == hi ? "pass" : "fail";
  }

  void dispatch(const std::string& name, CheckRecord& r) {
    const double tp = tol_.pointwise;
    const int n = scene_.chart.n;
    const int p = scene_.chart.codim();

    if (name == "frame_regularity") {
      Worst w;  // inverse conditioning of the differential
      for (int k = 0; k < count(); ++k) {
        try {
          frames_[k] = frame_at(scene_.chart, pts_[k], tol_.rank);
          w.take(frames_[k]->sigma_max / frames_[k]->sigma_min, k);
        } catch (const PreconditionError& e) {
          r.outcome = "fail";
          r.worst_point = pts_[k];
          r.details["error"] = e.what();
          return;
        }
      }
      r.value = w.v;
      r.details["max_condition_number"] = w.v;
      r.details["points"] = count();
      return;
    }
    if (name == "gauss_equation") return pointwise(r, 0.1 * tp, [&](int k) { return gauss_residual(frame(k)); });
    if (name == "codazzi_equation") return pointwise(r, 0.1 * tp, [&](int k) { return codazzi_residual(frame(k)); });
    if (name == "nullity") {
      constant_dim(r, [&](int k) { return nullity_at(frame(k), tol_.rank).nu; });
      r.details["n1_dim"] = nullity_at(frame(0), tol_.rank).n1_dim;
      return;
    }
    if (name == "bending") return pointwise(r, tp, [&](int k) { return bending_residual(frame(k), jet(k)); });
    if (name == "first_order_isometry") {
      r.details["t"] = 0.1;
      return pointwise(r, tp, [&](int k) { return first_order_isometry_residual(frame(k), jet(k), 0.1); });
    }
    if (name == "b_t_derivative") {
      return pointwise(r, 1e-5, [&](int k) {
        auto bt = b_from_variation(frame(k), jet(k));
        double worst = 0.0;
        for (int c = 0; c < n * n; ++c) worst = std::max(worst, (bt[c] - value(jet(k).B[c])).cwiseAbs().maxCoeff());
        return worst;
      });
    }
    if (name == "identity_parte") return pointwise(r, tp, [&](int k) { return identity_residuals(frame(k), jet(k)).parte; });
    if (name == "identity_der_gauss") return pointwise(r, tp, [&](int k) { return identity_residuals(frame(k), jet(k)).der_gauss; });
    if (name == "identity_casi_codazzi")
      return pointwise(r, tp, [&](int k) { return identity_residuals(frame(k), jet(k)).casi_codazzi; });
    if (name == "identity_segder_l")
      return pointwise(r, tp, [&](int k) { return identity_residuals(frame(k), jet(k)).segder_l; });
    if (name == "triviality") {
      if (p != 1) return not_applicable(r, "triviality test needs codimension 1");
      std::vector<PointFrame> fs;
      std::vector<BendingJet> js;
      for (int k = 0; k < count(); ++k) {
        fs.push_back(frame(k));
        js.push_back(jet(k));
      }
      TrivialityResult t = triviality_test_hypersurface(fs, js, tp);
      r.flag = t.trivial;
      r.residual = t.sup_norm;
      r.tolerance = tp;
      r.worst_point = pts_[t.worst];
      r.outcome = t.trivial ? "pass" : "fail";
      return;
    }
    if (name == "killing_normal") return killing_check(r);
    if (name == "flatness_theta") return pointwise(r, tp, [&](int k) { return flatness_residual(theta(k).theta); });
    if (name == "moore_theta") {
      return pointwise(r, tp, [&](int k) {
        const FormTable& t = theta(k).theta;
        RegularElement re = regular_element_search(t, 64, seed_, tol_.rank);
        return moore_containment_check(t, re, std::max(1e-8, tp), tol_.rank);
      });
    }
    if (name == "regular_rank_theta") {
      int best = 0, ker = 0;
      for (int k = 0; k < count(); ++k) {
        RegularElement re = regular_element_search(theta(k).theta, 64, seed_, tol_.rank);
        if (k == 0 || re.rank > best) best = re.rank;
        if (k == 0) ker = static_cast<int>(re.kernel.cols());
      }
      r.value = best;
      r.details["kernel_dim_at_center"] = ker;
      return;
    }
    if (name == "delta_star") {
      Worst w;
      for (int k = 0; k < count(); ++k) w.take(theta(k).delta_star_residual, k);
      constant_dim(r, [&](int k) { return theta(k).nu_star; });
      bool constant = r.outcome == "pass";
      r.residual = w.v;
      r.tolerance = tp;
      r.details["radical_dim_at_center"] = theta(0).radical_dim;
      r.outcome = constant && w.v <= tp ? "pass" : "fail";
      return;
    }
    if (name == "flatness_theta_hat") {
      int n1 = nullity_at(frame(0), tol_.rank).n1_dim;
      r.details["n1_dim"] = n1;
      return pointwise(r, tp, [&](int k) { return flatness_residual(build_theta_hat(frame(k), jet(k), n1, tol_.rank).theta); });
    }
    if (name == "main_decomposition_theta_hat") return main_decomposition_check(r);
    if (name == "isotropic_pair") {
      bool all = true, sum_nonzero = true;
      Worst w;
      for (int k = 0; k < count(); ++k) {
        auto pr = isotropic_normal_pair(theta(k), tol_.rank);
        if (!pr) {
          if (all) r.worst_point = pts_[k];
          all = false;
          continue;
        }
        sum_nonzero = sum_nonzero && pr->sum_nonzero;
        w.take(isotropic_pair_residual(theta(k), *pr), k);
      }
      r.flag = all;
      r.residual = w.v;
      r.tolerance = tp;
      r.details["sum_nonzero"] = all && sum_nonzero;
      r.outcome = all && w.v <= tp ? "pass" : "fail";
      return;
    }
    if (name == "condition_star") {
      Worst res, orth;
      int missing = 0;
      for (int k = 0; k < count(); ++k) {
        const StarPoint& sp = star(k).sp;
        if (!sp.found) {
          if (missing++ == 0) r.worst_point = pts_[k];
          continue;
        }
        res.take(sp.residual, k);
        orth.take(sp.orthogonality, k);
      }
      r.flag = missing == 0;
      r.details["points_without_solution"] = missing;
      r.details["kernel_dim_at_center"] = star(0).sp.kernel.cols();
      r.details["orthogonality"] = orth.v;
      if (missing) {
        r.outcome = "fail";
        return;
      }
      finish(r, res, tp);
      if (orth.v > 1e-10) r.outcome = "fail";
      return;
    }
    if (name == "condition_star_n1_perp") {
      return pointwise(r, tp, [&](int k) {
        VectorXd eta = value(star_full(k).field->eta);
        double worst = 0.0;
        for (int c = 0; c < n * n; ++c) worst = std::max(worst, std::abs(frame(k).inner(value(frame(k).alpha[c]), eta)));
        return worst;
      });
    }
    if (name == "l_bar_skew") return pointwise(r, 1e-3 * tp, [&](int k) { return star_full(k).lbar->skew; });
    if (name == "flatness_varphi") return pointwise(r, tp, [&](int k) { return flatness_residual(phi(k)); });
    if (name == "varphi_kernel_bound") {
      int bound = n + 1 - 2 * (p - 1);
      int lo = 1 << 30;
      for (int k = 0; k < count(); ++k) {
        RegularElement re = regular_element_search(phi(k), 64, seed_, tol_.rank);
        int kd = static_cast<int>(re.kernel.cols());
        if (kd < lo) {
          lo = kd;
          r.worst_point = pts_[k];
        }
      }
      r.value = lo;
      r.details["bound"] = bound;
      r.outcome = lo >= bound ? "pass" : "fail";
      return;
    }
    if (name == "varphi_kernel_alpha_r") {
      int coincide = 0;
      pointwise(r, tp, [&](int k) {
        MatrixXd nul = varphi_tangent_nullity(phi(k), tol_.rank);
        RegularElement re = regular_element_search(phi(k), 64, seed_, tol_.rank);
        if (re.kernel.cols() == nul.cols()) ++coincide;
        return varphi_kernel_alpha_r(frame(k), *star_full(k).lbar, nul);
      });
      r.details["points_where_kernel_is_nullity"] = coincide;
      return;
    }
    if (name == "impext_identity" || name == "requisito") {
      if (!scene_.lambda) return not_applicable(r, "scene declares no lambda section");
      bool imp = name == "impext_identity";
      return pointwise(r, imp ? 10.0 * tp : tp, [&](int k) {
        ImpextResult ir = impext_identity_check(frame(k), jet(k), *star_full(k).lbar, lambda(k));
        return imp ? ir.impext : ir.requisito;
      });
    }
    if (name == "singular_extension") {
      if (!scene_.lambda) return not_applicable(r, "scene declares no lambda section");
      return extension_check(r, [&](int k, double t) { return singular_extension_sample(frame(k), jet(k), lambda(k), t, tol_.rank); });
    }
    if (name == "trivial_extension") {
      if (!scene_.trivial) return not_applicable(r, "scene declares no trivial bending data");
      if (!scene_.lambda) return not_applicable(r, "scene declares no lambda section");
      r.details["eta"] = "first normal";
      return extension_check(r, [&](int k, double t) {
        const PointFrame& fr = frame(k);
        DVec zd = dual_values(jets_of(scene_.lambda->z, fr.point, 1));
        Dual ph = dual_values(jets_of({scene_.lambda->phi}, fr.point, 1))[0];
        DVec lam = ph * fr.normals[0];
        for (int j = 0; j < n; ++j) axpy(lam, zd[j], fr.f(j));
        return trivial_extension_sample(fr, jet(k), scene_.trivial->d, lam, t, tol_.rank);
      });
    }
    if (name == "ruling_nullity" || name == "ruling_delta_star") {
      bool star_rows = name == "ruling_delta_star";
      r.details["bound"] = ruling_bound(n, p, false);
      return ruling_check(r, ruling_bound(n, p, false),
                          [&](int k) { return kernel_sections(nullity_rows(frame(k), star_rows ? &jet(k) : nullptr), n, tol_.rank); });
    }
    if (name == "ruling_declared") {
      if (scene_.distribution.empty()) return not_applicable(r, "scene declares no distribution");
      return ruling_check(r, 0, [&](int k) {
        std::vector<std::vector<Dual>> secs;
        for (const auto& fld : scene_.distribution) secs.push_back(dual_values(jets_of(fld, frame(k).point, 1)));
        return secs;
      });
    }
    if (name == "splitting_riccati") {
      if (!scene_.splitting) return not_applicable(r, "scene declares no geodesic");
      const SplittingSpec& sp = *scene_.splitting;
      SplittingData sd = splitting_tensor_check(scene_.chart, scene_.tau, sp.start, sp.direction, sp.t_max, sp.step, tol_.rank);
      double ti = tol_.integration;
      r.residual = sd.riccati;
      r.tolerance = ti;
      r.value = sd.riccati;
      r.worst_point = std::vector<double>(sp.start.data(), sp.start.data() + n);
      r.details["principal_angle"] = sd.principal_angle;
      r.details["drift"] = sd.drift;
      r.details["nu_star"] = sd.nu_star;
      r.details["steps"] = static_cast<int>(sd.t.size()) - 1;
      r.outcome = sd.riccati <= ti && sd.principal_angle <= ti && sd.drift <= 1e-2 * ti ? "pass" : "fail";
      return;
    }
    if (name == "cone_consistency") return cone_check(r);
    throw PreconditionError("unknown check '" + name + "'");
  }

  void killing_check(CheckRecord& r) {
    if (!scene_.killing) return not_applicable(r, "scene declares no Killing data");
    const KillingSpec& ks = *scene_.killing;
    const int n = scene_.chart.n, m = scene_.chart.ambient_dim;
    Worst kill, perp, recon;
    for (int k = 0; k < count(); ++k) {
      const PointFrame& fr = frame(k);
      DVec z = dual_values(jets_of(ks.z, fr.point, 1));
      auto dj = jets_of(ks.delta, fr.point, 0);
      VectorXd delta(m);
      for (int a = 0; a < m; ++a) delta[a] = dj[a].value;
      double kr = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int l = 0; l < n; ++l)
            s += z[l].v * fr.metric(i, j).d[l] + fr.metric(l, j).v * z[l].d[i] + fr.metric(i, l).v * z[l].d[j];
          kr = std::max(kr, std::abs(s));
        }
      kill.take(kr, k);
      double pr = fr.tangent_part(delta).norm();
      for (int c = 0; c < n * n; ++c) pr = std::max(pr, std::abs(fr.inner(value(fr.alpha[c]), delta)));
      perp.take(pr, k);
      VectorXd t = value(jet(k).tau) - delta;
      for (int l = 0; l < n; ++l) t -= z[l].v * value(fr.f(l));
      recon.take(t.cwiseAbs().maxCoeff(), k);
    }
    const double tp = tol_.pointwise;
    r.details["killing_residual"] = kill.v;
    r.details["delta_residual"] = perp.v;
    r.details["reconstruction"] = recon.v;
    Worst all = kill;
    if (perp.v > all.v) all = perp;
    if (recon.v > all.v) all = recon;
    finish(r, all, tp);
    if (kill.v > 0.1 * tp) r.outcome = "fail";
  }

  void main_decomposition_check(CheckRecord& r) {
    int n1 = nullity_at(frame(0), tol_.rank).n1_dim;
    int ell = 1 << 30;
    Worst iso, flat;
    for (int k = 0; k < count(); ++k) {
      ThetaData th = build_theta_hat(frame(k), jet(k), n1, tol_.rank);
      MainDecomposition md;
      try {
        md = main_decomposition(th.theta, tol_.rank, seed_);
      } catch (const PreconditionError& e) {
        r.worst_point = pts_[k];
        return not_applicable(r, e.what());
      }
      if (md.outside_guarantee) r.details["outside_guarantee"] = true;
      if (!md.invariants_hold(1e-8, tol_.pointwise)) {
        r.outcome = "fail";
        r.worst_point = pts_[k];
        r.details["message"] = md.structure_check_failed ? md.message : "decomposition invariants violated";
        r.details["reassembly"] = md.reassembly;
        r.details["b1_isotropy"] = md.b1_isotropy;
        r.details["b2_flatness"] = md.b2_flatness;
        r.details["b2_nullity"] = md.b2_nullity;
        r.details["nullity_bound"] = md.nullity_bound;
        return;
      }
      ell = std::min(ell, md.ell);
      iso.take(md.b1_isotropy, k);
      flat.take(md.b2_flatness, k);
    }
    r.value = ell;
    r.details["b1_isotropy"] = iso.v;
    finish(r, flat, tol_.pointwise);
  }

  void extension_check(CheckRecord& r, const std::function<ExtensionSample(int, double)>& f) {
    const int np = std::min(count(), scene_.extension.points);
    if (scene_.extension.t.empty()) throw PreconditionError("extension needs at least one t value");
    Worst w;
    double tt = 0.0, mixed = 0.0, xx = 0.0;
    int immersed = 0, excluded = 0;
    nlohmann::ordered_json locus = nlohmann::ordered_json::array();
    for (int k = 0; k < np; ++k)
      for (double t : scene_.extension.t) {
        ExtensionSample s = f(k, t);
        if (!s.immersion) {
          ++excluded;
          if (locus.size() < 16) locus.push_back({{"point", pts_[k]}, {"t", t}});
          continue;
        }
        ++immersed;
        tt = std::max(tt, s.tt);
        mixed = std::max(mixed, s.mixed);
        xx = std::max(xx, s.xx);
        w.take(std::max({s.tt, s.mixed, s.xx}), k);
      }
    r.details["samples"] = np * static_cast<int>(scene_.extension.t.size());
    r.details["immersion_samples"] = immersed;
    r.details["excluded_samples"] = excluded;
    r.details["tt"] = tt;
    r.details["mixed"] = mixed;
    r.details["xx"] = xx;
    r.details["non_immersion_locus"] = locus;
    r.value = immersed;
    finish(r, w, tol_.pointwise);
    if (immersed == 0) r.outcome = "fail";
  }

  void ruling_check(CheckRecord& r, int bound, const std::function<std::vector<std::vector<Dual>>(int)>& sections) {
    Worst w;
    int rr = -1;
    double tg = 0.0, af = 0.0;
    for (int k = 0; k < count(); ++k) {
      RulingResult rs = ruling_residuals(frame(k), sections(k));
      if (rr < 0) rr = rs.r;
      if (rs.r != rr) throw PreconditionError("distribution dimension jumps at " + detail::point_string(pts_[k]));
      tg = std::max(tg, rs.totally_geodesic);
      af = std::max(af, rs.affine);
      w.take(std::max(rs.totally_geodesic, rs.affine), k);
    }
    r.value = rr;
    r.details["totally_geodesic"] = tg;
    r.details["affine"] = af;
    finish(r, w, tol_.pointwise);
    if (rr < bound || rr == 0) r.outcome = "fail";
  }

  void cone_check(CheckRecord& r) {
    if (!scene_.cone) return not_applicable(r, "scene is not a cone");
    const ConeSpec& cs = *scene_.cone;
    const ImmersionChart& ch = scene_.chart;
    const int m = ch.ambient_dim, n = ch.n;
    if (cs.s_index < 0 || cs.s_index >= n) throw PreconditionError("cone parameter index out of range");
    bool hyper = cs.kind == ConeKind::Hyperbolic;
    if (hyper != (ch.ambient_signature == 1)) throw PreconditionError("cone kind does not match the ambient signature");
    const double target = hyper ? -1.0 : 1.0;
    Worst norm, orth, homog, bend;
    int bad_normal = 0;
    for (int k = 0; k < count(); ++k) {
      const PointFrame& fr = frame(k);
      const double s = pts_[k][cs.s_index];
      VectorXd f(m), fs(m), t(m), ts(m);
      for (int a = 0; a < m; ++a) {
        f[a] = fr.f_jets[a].value;
        fs[a] = fr.f_jets[a].d(cs.s_index);
        t[a] = jet(k).tau_jets[a].value;
        ts[a] = jet(k).tau_jets[a].d(cs.s_index);
      }
      norm.take(std::abs(fr.inner(f, f) / (s * s) - target), k);
      orth.take(std::abs(fr.inner(f, ts)) / s, k);
      homog.take(std::max((f - s * fs).cwiseAbs().maxCoeff(), (t - s * ts).cwiseAbs().maxCoeff()), k);
      bend.take(bending_residual(fr, jet(k)), k);
      if ((fr.normal_signature().array() < 0.0).any()) ++bad_normal;
    }
    r.details["normalization"] = norm.v;
    r.details["position_orthogonality"] = orth.v;
    r.details["homogeneity"] = homog.v;
    r.details["bending"] = bend.v;
    r.details["metric_index"] = ch.metric_index;
    r.details["points_with_indefinite_normal_bundle"] = bad_normal;
    Worst all = norm;
    for (const Worst* x : {&orth, &homog})
      if (x->v > all.v) all = *x;
    finish(r, all, 1e-10);
    if (bend.v > 0.1 * tol_.pointwise || bad_normal) r.outcome = "fail";
  }
};

}  // namespace detail

inline RunResult run_verification(const Scene& scene, const RunConfig& cfg = {}) {
  if (cfg.checks)
    for (const auto& c : *cfg.checks)
      if (!is_check_name(c)) throw PreconditionError("unknown check '" + c + "'");
  detail::Runner runner(scene, cfg);
  return runner.run();
}

}  // namespace ibend
