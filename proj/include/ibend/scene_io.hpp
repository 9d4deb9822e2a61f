#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ibend/error.hpp"
#include "ibend/expression.hpp"
#include "ibend/scene.hpp"
#include "ibend/verify.hpp"

namespace ibend {

inline constexpr const char* kSceneSchema = "ibend-scene/1";

/// Scene file rejected; pointer() is a JSON pointer to the offending value.
class SceneError : public Error {
 public:
  SceneError(const std::string& pointer, const std::string& what) : Error(pointer + ": " + what), pointer_(pointer), message_(what) {}
  const std::string& pointer() const noexcept { return pointer_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string pointer_;
  std::string message_;
};

namespace io {

using json = nlohmann::json;

inline std::string ptr(const std::string& base, const std::string& key) { return base + "/" + key; }
inline std::string ptr(const std::string& base, std::size_t i) { return base + "/" + std::to_string(i); }

inline const json& need(const json& j, const std::string& key, const std::string& at) {
  if (!j.is_object()) throw SceneError(at.empty() ? "/" : at, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SceneError(ptr(at, key), "missing required field");
  return *it;
}

inline double number(const json& j, const std::string& at) {
  if (!j.is_number()) throw SceneError(at, "expected a number");
  return j.get<double>();
}

inline int integer(const json& j, const std::string& at) {
  if (!j.is_number_integer()) throw SceneError(at, "expected an integer");
  return j.get<int>();
}

inline std::string text(const json& j, const std::string& at) {
  if (!j.is_string()) throw SceneError(at, "expected a string");
  return j.get<std::string>();
}

inline const json& array(const json& j, const std::string& at, std::optional<std::size_t> size = std::nullopt) {
  if (!j.is_array()) throw SceneError(at, "expected an array");
  if (size && j.size() != *size) throw SceneError(at, "expected " + std::to_string(*size) + " entries, found " + std::to_string(j.size()));
  return j;
}

inline Expr expr(const json& j, int n, const std::string& at) {
  if (j.is_number()) return Expr::constant(j.get<double>(), n);
  std::string s = text(j, at);
  try {
    Expr e = parse_expression(s, n);
    return Expr(e.node(), n);
  } catch (const ParseError& e) {
    throw SceneError(at, e.what());
  }
}

inline std::vector<Expr> exprs(const json& j, int n, std::size_t size, const std::string& at) {
  array(j, at, size);
  std::vector<Expr> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(expr(j[i], n, ptr(at, i)));
  return out;
}

inline VectorXd vec(const json& j, std::size_t size, const std::string& at) {
  array(j, at, size);
  VectorXd v(static_cast<Eigen::Index>(size));
  for (std::size_t i = 0; i < size; ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], ptr(at, i));
  return v;
}

inline Expectation expectation(const json& j, const std::string& at) {
  Expectation e;
  if (j.is_string()) {
    e.status = j.get<std::string>();
  } else if (j.is_boolean()) {
    e.flag = j.get<bool>();
  } else if (j.is_number()) {
    e.value = j.get<double>();
  } else if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (k == "status") e.status = text(v, ptr(at, k));
      else if (k == "value") e.value = number(v, ptr(at, k));
      else if (k == "flag") {
        if (!v.is_boolean()) throw SceneError(ptr(at, k), "expected a boolean");
        e.flag = v.get<bool>();
      } else if (k == "tolerance") e.tolerance = number(v, ptr(at, k));
      else throw SceneError(ptr(at, k), "unknown field");
    }
  } else {
    throw SceneError(at, "expected a status string, boolean, number or object");
  }
  if (!e.status.empty() && e.status != "pass" && e.status != "fail" && e.status != "skipped" && e.status != "not-applicable")
    throw SceneError(j.is_object() ? ptr(at, "status") : at, "unknown status '" + e.status + "'");
  return e;
}

}  // namespace io

inline Scene scene_from_json(const nlohmann::json& src) {
  using namespace io;
  const json& j = src;
  if (!j.is_object()) throw SceneError("/", "scene must be a JSON object");
  static const std::vector<std::string> known = {"schema",  "name",     "description", "n",         "ambient_dim", "ambient_signature",
                                                 "metric_index", "chart_box", "f",     "tau",       "lambda",      "distribution",
                                                 "trivial", "killing",  "cone",        "splitting", "extension",   "sampling",
                                                 "tolerances", "checks", "expected",   "tags"};
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw SceneError("/" + k, "unknown field");
  if (j.contains("schema") && text(j["schema"], "/schema") != kSceneSchema) throw SceneError("/schema", "unsupported schema");

  Scene s;
  s.name = text(need(j, "name", ""), "/name");
  if (j.contains("description")) s.description = text(j["description"], "/description");
  const int n = integer(need(j, "n", ""), "/n");
  if (n < 1 || n > kMaxVars) throw SceneError("/n", "chart dimension must be in 1.." + std::to_string(kMaxVars));
  const int m = integer(need(j, "ambient_dim", ""), "/ambient_dim");
  if (m <= n) throw SceneError("/ambient_dim", "must exceed n");
  auto& ch = s.chart;
  ch.n = n;
  ch.ambient_dim = m;
  if (j.contains("ambient_signature")) {
    ch.ambient_signature = integer(j["ambient_signature"], "/ambient_signature");
    if (ch.ambient_signature < 0 || ch.ambient_signature > 1) throw SceneError("/ambient_signature", "must be 0 or 1");
  }
  if (j.contains("metric_index")) {
    ch.metric_index = integer(j["metric_index"], "/metric_index");
    if (ch.metric_index < 0 || ch.metric_index > ch.ambient_signature) throw SceneError("/metric_index", "must be 0 or the ambient signature");
  }
  const json& box = array(need(j, "chart_box", ""), "/chart_box", static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < box.size(); ++i) {
    std::string at = ptr("/chart_box", i);
    array(box[i], at, 2);
    Interval iv{number(box[i][0], ptr(at, 0)), number(box[i][1], ptr(at, 1))};
    if (!(iv.lo < iv.hi)) throw SceneError(at, "interval is empty");
    ch.box.push_back(iv);
  }
  ch.components = exprs(need(j, "f", ""), n, static_cast<std::size_t>(m), "/f");
  s.tau.components = exprs(need(j, "tau", ""), n, static_cast<std::size_t>(m), "/tau");

  if (j.contains("lambda")) {
    const json& l = j["lambda"];
    LambdaSpec ls;
    ls.z = exprs(need(l, "Z", "/lambda"), n, static_cast<std::size_t>(n), "/lambda/Z");
    ls.phi = expr(need(l, "phi", "/lambda"), n, "/lambda/phi");
    s.lambda = ls;
  }
  if (j.contains("distribution")) {
    const json& d = array(j["distribution"], "/distribution");
    for (std::size_t i = 0; i < d.size(); ++i) s.distribution.push_back(exprs(d[i], n, static_cast<std::size_t>(n), ptr("/distribution", i)));
  }
  if (j.contains("trivial")) {
    const json& t = j["trivial"];
    const json& dj = array(need(t, "D", "/trivial"), "/trivial/D", static_cast<std::size_t>(m));
    TrivialSpec ts;
    ts.d.resize(m, m);
    for (int a = 0; a < m; ++a) ts.d.row(a) = vec(dj[a], static_cast<std::size_t>(m), ptr("/trivial/D", a)).transpose();
    ts.w = vec(need(t, "w", "/trivial"), static_cast<std::size_t>(m), "/trivial/w");
    s.trivial = ts;
  }
  if (j.contains("killing")) {
    const json& k = j["killing"];
    KillingSpec ks;
    ks.z = exprs(need(k, "Z", "/killing"), n, static_cast<std::size_t>(n), "/killing/Z");
    ks.delta = exprs(need(k, "delta", "/killing"), n, static_cast<std::size_t>(m), "/killing/delta");
    s.killing = ks;
  }
  if (j.contains("cone")) {
    const json& c = j["cone"];
    ConeSpec cs;
    std::string kind = text(need(c, "kind", "/cone"), "/cone/kind");
    if (kind == "spherical") cs.kind = ConeKind::Spherical;
    else if (kind == "hyperbolic") cs.kind = ConeKind::Hyperbolic;
    else throw SceneError("/cone/kind", "expected 'spherical' or 'hyperbolic'");
    int sv = integer(need(c, "s_variable", "/cone"), "/cone/s_variable");
    if (sv < 1 || sv > n) throw SceneError("/cone/s_variable", "variable index out of range");
    cs.s_index = sv - 1;
    if ((cs.kind == ConeKind::Hyperbolic) != (ch.ambient_signature == 1))
      throw SceneError("/cone/kind", "cone kind does not match the ambient signature");
    s.cone = cs;
  }
  if (j.contains("splitting")) {
    const json& g = j["splitting"];
    SplittingSpec sp;
    sp.start = vec(need(g, "start", "/splitting"), static_cast<std::size_t>(n), "/splitting/start");
    sp.direction = vec(need(g, "direction", "/splitting"), static_cast<std::size_t>(n), "/splitting/direction");
    sp.t_max = number(need(g, "t_max", "/splitting"), "/splitting/t_max");
    if (!(sp.t_max > 0.0)) throw SceneError("/splitting/t_max", "must be positive");
    if (g.contains("step")) sp.step = number(g["step"], "/splitting/step");
    if (!(sp.step > 0.0)) throw SceneError("/splitting/step", "must be positive");
    s.splitting = sp;
  }
  if (j.contains("extension")) {
    const json& e = j["extension"];
    if (e.contains("points")) s.extension.points = integer(e["points"], "/extension/points");
    if (s.extension.points < 1) throw SceneError("/extension/points", "must be positive");
    if (e.contains("t")) {
      const json& t = array(e["t"], "/extension/t");
      if (t.empty()) throw SceneError("/extension/t", "t interval is degenerate");
      s.extension.t.clear();
      for (std::size_t i = 0; i < t.size(); ++i) s.extension.t.push_back(number(t[i], ptr("/extension/t", i)));
    }
  }
  if (j.contains("sampling")) {
    const json& sm = j["sampling"];
    if (sm.contains("points")) s.sampling.points = integer(sm["points"], "/sampling/points");
    if (s.sampling.points < 0) throw SceneError("/sampling/points", "must be nonnegative");
    if (sm.contains("grid")) {
      const json& g = array(sm["grid"], "/sampling/grid", static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < g.size(); ++i) {
        int c = integer(g[i], ptr("/sampling/grid", i));
        if (c < 1) throw SceneError(ptr("/sampling/grid", i), "must be positive");
        s.sampling.grid.push_back(c);
      }
    }
    if (sm.contains("seed")) {
      if (!sm["seed"].is_number_unsigned()) throw SceneError("/sampling/seed", "expected a nonnegative integer");
      s.sampling.seed = sm["seed"].get<std::uint64_t>();
    }
  }
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    auto pos = [&](const char* key, double& dst) {
      if (!t.contains(key)) return;
      dst = number(t[key], ptr("/tolerances", key));
      if (!(dst > 0.0)) throw SceneError(ptr("/tolerances", key), "must be positive");
    };
    pos("pointwise", s.tolerances.pointwise);
    pos("integration", s.tolerances.integration);
    pos("rank", s.tolerances.rank);
  }
  if (j.contains("checks")) {
    const json& c = array(j["checks"], "/checks");
    for (std::size_t i = 0; i < c.size(); ++i) {
      std::string nm = text(c[i], ptr("/checks", i));
      if (!is_check_name(nm)) throw SceneError(ptr("/checks", i), "unknown check '" + nm + "'");
      s.add_check(nm);
    }
  }
  if (j.contains("expected")) {
    const json& e = j["expected"];
    if (!e.is_object()) throw SceneError("/expected", "expected an object");
    for (const auto& [k, v] : e.items()) {
      if (!is_check_name(k)) throw SceneError(ptr("/expected", k), "unknown check '" + k + "'");
      s.expected[k] = expectation(v, ptr("/expected", k));
    }
  }
  if (j.contains("tags")) {
    const json& t = array(j["tags"], "/tags");
    static const std::vector<std::string> tags = {"trivial", "genuine-candidate", "negative-control", "cone", "lorentzian", "condition-star"};
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::string tg = text(t[i], ptr("/tags", i));
      if (std::find(tags.begin(), tags.end(), tg) == tags.end()) throw SceneError(ptr("/tags", i), "unknown tag '" + tg + "'");
      s.tags.push_back(tg);
    }
  }
  try {
    ch.validate();
  } catch (const PreconditionError& e) {
    throw SceneError("/f", e.what());
  }
  for (std::size_t i = 0; i < s.tau.components.size(); ++i)
    if (s.tau.components[i].dim() > n) throw SceneError(io::ptr("/tau", i), "uses a variable outside the chart");
  return s;
}

inline Scene scene_from_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SceneError("", std::string("invalid JSON: ") + e.what());
  }
  return scene_from_json(j);
}

inline Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_text(ss.str());
}

inline nlohmann::ordered_json expectation_to_json(const Expectation& e) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (!e.status.empty()) j["status"] = e.status;
  if (e.value) j["value"] = *e.value;
  if (e.flag) j["flag"] = *e.flag;
  if (e.tolerance != 0.0) j["tolerance"] = e.tolerance;
  return j;
}

inline nlohmann::ordered_json scene_to_json(const Scene& s) {
  using json = nlohmann::ordered_json;
  auto strs = [](const std::vector<Expr>& v) {
    json a = json::array();
    for (const auto& e : v) a.push_back(e.to_string());
    return a;
  };
  auto vec = [](const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  };
  json j;
  j["schema"] = kSceneSchema;
  j["name"] = s.name;
  if (!s.description.empty()) j["description"] = s.description;
  j["n"] = s.chart.n;
  j["ambient_dim"] = s.chart.ambient_dim;
  j["ambient_signature"] = s.chart.ambient_signature;
  j["metric_index"] = s.chart.metric_index;
  j["chart_box"] = json::array();
  for (const auto& iv : s.chart.box) j["chart_box"].push_back({iv.lo, iv.hi});
  j["f"] = strs(s.chart.components);
  j["tau"] = strs(s.tau.components);
  if (s.lambda) j["lambda"] = {{"Z", strs(s.lambda->z)}, {"phi", s.lambda->phi.to_string()}};
  if (!s.distribution.empty()) {
    j["distribution"] = json::array();
    for (const auto& d : s.distribution) j["distribution"].push_back(strs(d));
  }
  if (s.trivial) {
    json d = json::array();
    for (Eigen::Index a = 0; a < s.trivial->d.rows(); ++a) d.push_back(vec(s.trivial->d.row(a).transpose()));
    j["trivial"] = {{"D", d}, {"w", vec(s.trivial->w)}};
  }
  if (s.killing) j["killing"] = {{"Z", strs(s.killing->z)}, {"delta", strs(s.killing->delta)}};
  if (s.cone)
    j["cone"] = {{"kind", s.cone->kind == ConeKind::Spherical ? "spherical" : "hyperbolic"}, {"s_variable", s.cone->s_index + 1}};
  if (s.splitting)
    j["splitting"] = {{"start", vec(s.splitting->start)},
                      {"direction", vec(s.splitting->direction)},
                      {"t_max", s.splitting->t_max},
                      {"step", s.splitting->step}};
  j["extension"] = {{"points", s.extension.points}, {"t", s.extension.t}};
  j["sampling"] = json::object();
  if (s.sampling.grid.empty()) j["sampling"]["points"] = s.sampling.points;
  else j["sampling"]["grid"] = s.sampling.grid;
  j["sampling"]["seed"] = s.sampling.seed;
  j["tolerances"] = {{"pointwise", s.tolerances.pointwise}, {"integration", s.tolerances.integration}, {"rank", s.tolerances.rank}};
  j["checks"] = s.checks;
  j["expected"] = json::object();
  for (const auto& nm : check_names()) {
    auto it = s.expected.find(nm);
    if (it != s.expected.end()) j["expected"][nm] = expectation_to_json(it->second);
  }
  j["tags"] = s.tags;
  return j;
}

}  // namespace ibend
