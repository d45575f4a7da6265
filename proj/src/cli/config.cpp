#include <cmath>
#include <fstream>
#include <sstream>

#include "mfg/cli.hpp"

namespace mfg::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw InputError("config: " + msg); }

const json& section(const json& doc, const char* name) {
  if (!doc.contains(name) || !doc.at(name).is_object()) fail(std::string("missing section '") + name + "'");
  return doc.at(name);
}

double number(const json& obj, const char* key, std::optional<double> fallback = {}) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    fail(std::string("missing number '") + key + "'");
  }
  const json& v = obj.at(key);
  if (!v.is_number()) fail(std::string("'") + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(std::string("'") + key + "' must be finite");
  return x;
}

int integer(const json& obj, const char* key, std::optional<int> fallback = {}) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    fail(std::string("missing integer '") + key + "'");
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail(std::string("'") + key + "' must be an integer");
  return v.get<int>();
}

std::string text(const json& obj, const char* key, std::optional<std::string> fallback = {}) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    fail(std::string("missing string '") + key + "'");
  }
  if (!obj.at(key).is_string()) fail(std::string("'") + key + "' must be a string");
  return obj.at(key).get<std::string>();
}

std::vector<int> first_axis(const ModeLattice& lat, int k) {
  std::vector<int> mode(lat.dim(), 0);
  mode[0] = k;
  return mode;
}

/// Mode list [{"k": [..], "re": x, "im": y}, ...] or a preset
/// {"preset": "delta_cos" | "two_mode", "amplitude": a}. Each list entry sets the
/// coefficient at k and its conjugate at -k.
Slice parse_snapshot(const json& node, const ModeLattice& lat, const std::string& what, bool allow_mean) {
  Slice s(lat);
  if (node.is_object()) {
    const std::string preset = text(node, "preset");
    const double a = number(node, "amplitude");
    if (preset == "delta_cos") return cosine_mode(lat, std::span<const int>(first_axis(lat, 1)), a);
    if (preset == "two_mode") {
      if (lat.cutoff() < 2) fail(what + ": preset two_mode needs K >= 2");
      return cosine_mode(lat, std::span<const int>(first_axis(lat, 1)), a) +
             sine_mode(lat, std::span<const int>(first_axis(lat, 2)), 0.5 * a);
    }
    fail(what + ": unknown preset '" + preset + "' (expected delta_cos or two_mode)");
  }
  if (!node.is_array()) fail(what + " must be a mode list or a preset object");
  for (const json& entry : node) {
    if (!entry.is_object() || !entry.contains("k") || !entry.at("k").is_array())
      fail(what + ": each mode needs an integer array 'k'");
    std::vector<int> k;
    for (const json& c : entry.at("k")) {
      if (!c.is_number_integer()) fail(what + ": mode indices must be integers");
      k.push_back(c.get<int>());
    }
    if (int(k.size()) != lat.dim()) fail(what + ": mode index has wrong dimension");
    if (!lat.contains(k)) fail(what + ": mode outside |k|_inf <= K");
    const bool zero = std::all_of(k.begin(), k.end(), [](int c) { return c == 0; });
    const double re = number(entry, "re", 0.0), im = number(entry, "im", 0.0);
    if (zero && !allow_mean) fail(what + " must be mean-zero (k = 0 entry given)");
    if (zero && im != 0.0) fail(what + ": k = 0 coefficient must be real");
    s.set_pair(k, {re, im});
  }
  return s;
}

std::optional<Slice> coefficient_field(const json& ham, const char* name, const ModeLattice& lat) {
  if (!ham.contains("coefficients") || !ham.at("coefficients").contains(name)) return std::nullopt;
  return parse_snapshot(ham.at("coefficients").at(name), lat, std::string("hamiltonian coefficient ") + name, true);
}

std::array<int, 3> triple(const json& params, int dim) {
  if (!params.contains("indices") || !params.at("indices").is_array() || params.at("indices").size() != 3)
    fail("hamiltonian params need 'indices' with three momentum indices");
  std::array<int, 3> idx{};
  for (int i = 0; i < 3; ++i) {
    const json& v = params.at("indices").at(i);
    if (!v.is_number_integer() || v.get<int>() < 0 || v.get<int>() >= dim)
      fail("hamiltonian momentum indices must lie in [0, n)");
    idx[i] = v.get<int>();
  }
  return idx;
}

HamiltonianModel parse_model(const json& doc, const ModeLattice& lat) {
  const json& ham = section(doc, "hamiltonian");
  const std::string name = text(ham, "name");
  const json params = ham.contains("params") ? ham.at("params") : json::object();
  if (!params.is_object()) fail("hamiltonian params must be an object");
  const int dim = lat.dim();
  auto exponent = [&](const char* key, int fallback) {
    const int v = integer(params, key, fallback);
    if (v < 0) fail(std::string("hamiltonian exponent '") + key + "' must be >= 0");
    return v;
  };
  if (name == "zero") return zero_model(dim);
  if (name == "separable_quartic") return separable_quartic(dim, coefficient_field(ham, "a", lat));
  if (name == "separable_triple") return separable_triple(dim, triple(params, dim), coefficient_field(ham, "a", lat));
  if (name == "coupled_triple")
    return coupled_triple(dim, triple(params, dim), exponent("ell", 1), exponent("sigma", 3),
                          coefficient_field(ham, "a1", lat), coefficient_field(ham, "a2", lat));
  if (name == "coupled_quartic")
    return coupled_quartic(dim, exponent("ell", 1), exponent("sigma", 3), coefficient_field(ham, "a1", lat),
                           coefficient_field(ham, "a2", lat));
  if (name == "quartic_cubic") return quartic_cubic(dim);
  if (name == "density_quadratic") return density_quadratic(dim, exponent("j", 1));
  if (name == "density_power") return density_power(dim, exponent("sigma", 3), coefficient_field(ham, "a", lat));
  fail("unknown hamiltonian '" + name + "'");
}

}  // namespace

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) fail("top level must be an object");
  const json& prob = section(doc, "problem");
  const std::string kind = text(prob, "kind");
  if (kind != "payoff" && kind != "planning") fail("problem.kind must be payoff or planning");
  const double T = number(prob, "T");
  const double alpha = number(prob, "alpha");
  const int n = integer(prob, "n", 1);
  const int K = integer(prob, "K");
  const int N = integer(prob, "N");
  if (!(T > 0.0)) fail("problem.T must be > 0");
  if (!(alpha > 0.0 && alpha < T / 2)) fail("problem.alpha must lie in (0, T/2)");
  if (N < 2 || N % 2 != 0) fail("problem.N must be even and >= 2");
  if (n < 1 || n > 3) fail("problem.n must be 1, 2 or 3");
  if (K < 1 || K > 256) fail("problem.K must lie in [1, 256]");

  const ModeLattice lat(n, K);
  Grid grid = make_grid(T, alpha, N);
  HamiltonianModel model = parse_model(doc, lat);

  const json& data = section(doc, "data");
  if (!data.contains("mu0")) fail("data.mu0 is required");
  Slice mu0 = parse_snapshot(data.at("mu0"), lat, "data.mu0", false);
  const bool signed_ok = data.contains("allow_signed_density") && data.at("allow_signed_density").is_boolean() &&
                         data.at("allow_signed_density").get<bool>();

  RunConfig cfg{doc, kind == "payoff" ? make_payoff_problem(grid, model, mu0,
                                                            PayoffOperator::from_name(text(data, "payoff", "identity")))
                                      : make_planning_problem(grid, model, mu0,
                                                              data.contains("wT")
                                                                  ? parse_snapshot(data.at("wT"), lat, "data.wT", false)
                                                                  : Slice(lat),
                                                              number(data, "uT_mean", 0.0)),
                {}, {}, {}, {}, {}};
  if (kind == "payoff" && data.contains("wT")) fail("data.wT only applies to planning problems");
  if (kind == "planning" && !data.contains("wT")) fail("planning problems need data.wT");
  if (!signed_ok && !cfg.problem.density_nonnegative())
    fail("m0 = mu0 + mbar is negative somewhere; set data.allow_signed_density to run anyway");

  if (doc.contains("solver")) {
    const json& s = doc.at("solver");
    if (!s.is_object()) fail("solver must be an object");
    cfg.solver.tol = number(s, "tol", 1e-9);
    cfg.solver.max_iter = integer(s, "max_iter", 200);
    if (s.contains("epsilon") && !s.at("epsilon").is_null()) cfg.solver.epsilon = number(s, "epsilon");
  }
  if (!(cfg.solver.tol > 0.0)) fail("solver.tol must be > 0");
  if (cfg.solver.max_iter < 1) fail("solver.max_iter must be >= 1");
  if (cfg.solver.epsilon && kind != "planning") fail("solver.epsilon requires a planning problem");

  if (doc.contains("continuation")) {
    const json& c = doc.at("continuation");
    if (!c.is_object()) fail("continuation must be an object");
    ContinuationSettings cs{number(c, "eps_max"), integer(c, "steps")};
    if (!(cs.eps_max > 0.0)) fail("continuation.eps_max must be > 0");
    if (cs.steps < 1) fail("continuation.steps must be >= 1");
    if (kind != "planning") fail("continuation requires a planning problem");
    cfg.continuation = cs;
  }

  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    if (!s.is_object()) fail("sweep must be an object");
    SweepSettings sw{text(s, "parameter"), {}};
    if (sw.parameter != "delta" && sw.parameter != "wT_amplitude" && sw.parameter != "epsilon")
      fail("sweep.parameter must be delta, wT_amplitude or epsilon");
    if (!s.contains("values") || !s.at("values").is_array()) fail("sweep.values must be an array");
    for (const json& v : s.at("values")) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) fail("sweep.values must be finite numbers");
      sw.values.push_back(v.get<double>());
    }
    if ((sw.parameter == "wT_amplitude" || sw.parameter == "epsilon") && kind != "planning")
      fail("sweep over " + sw.parameter + " requires a planning problem");
    cfg.sweep = sw;
  }

  if (doc.contains("verify")) {
    const json& v = doc.at("verify");
    if (!v.is_object()) fail("verify must be an object");
    VerifyThresholds& t = cfg.verify;
    t.hjb = number(v, "hjb", t.hjb);
    t.fp = number(v, "fp", t.fp);
    t.boundary = number(v, "boundary", t.boundary);
    t.mass = number(v, "mass", t.mass);
    if (v.contains("positivity") && v.at("positivity").is_null())
      t.positivity.reset();
    else
      t.positivity = number(v, "positivity", 0.0);
    if (v.contains("decay")) {
      if (!v.at("decay").is_boolean()) fail("verify.decay must be a boolean");
      t.decay = v.at("decay").get<bool>();
    }
    if (t.hjb < 0 || t.fp < 0 || t.boundary < 0 || t.mass < 0) fail("verify thresholds must be >= 0");
  }

  if (doc.contains("output")) {
    const json& o = doc.at("output");
    if (!o.is_object()) fail("output must be an object");
    if (o.contains("directory")) cfg.output_directory = text(o, "directory");
    if (o.contains("formats")) {
      if (!o.at("formats").is_array()) fail("output.formats must be an array");
      for (const json& f : o.at("formats"))
        if (!f.is_string() || f.get<std::string>() != "table") fail("output.formats supports only \"table\"");
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return parse_config(doc);
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

json with_parameter(json doc, const std::string& parameter, double value) {
  if (parameter == "epsilon") {
    doc["solver"]["epsilon"] = value;
  } else {
    const char* key = parameter == "delta" ? "mu0" : "wT";
    json& node = doc["data"][key];
    if (node.is_object() && node.contains("preset"))
      node["amplitude"] = value;
    else
      node = json{{"preset", "delta_cos"}, {"amplitude", value}};
  }
  doc.erase("sweep");
  return doc;
}

}  // namespace mfg::cli
