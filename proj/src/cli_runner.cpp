#include "thinfb/cli_runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "thinfb/barrier.hpp"
#include "thinfb/domain_variation.hpp"
#include "thinfb/errors.hpp"
#include "thinfb/fb_solver.hpp"
#include "thinfb/flatness_harness.hpp"
#include "thinfb/geometry.hpp"
#include "thinfb/linearized_solver.hpp"
#include "thinfb/sampling.hpp"

namespace thinfb {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Schema: every section is an object of typed keys with defaults. The default's JSON type is the
// key's type; integers must be given as integers.
// ---------------------------------------------------------------------------

const ojson& section_defaults() {
  static const ojson d = ojson::parse(R"({
    "eval_u": {
      "samples": 10000, "radius": 1.0, "identity_tol": 1e-12,
      "order_h": [0.03125, 0.015625, 0.0078125], "order_point": [0.5, 0.25], "order_tol": 0.2,
      "field_h": 0.0625, "field_box": 1.0
    },
    "check_barrier": {
      "n": 2, "R": 100.0, "sample_count": 301,
      "expansion_radii": [0.1, 0.05, 0.025],
      "tilde_R": [50.0, 100.0, 200.0, 400.0], "tilde_ball": 0.5, "tilde_factor": 2.0,
      "shift_R": [200.0, 400.0], "shift_scaling_tol": 0.2
    },
    "domain_variation": {
      "n": 2, "eps": 0.05, "rho": 0.5, "a0": [[0.0], [0.4], [0.8]], "samples": 1000, "tol": 1e-8,
      "eta": 0.5, "scales": 4
    },
    "solve_fb": {
      "n": 1, "h": 0.0078125, "box": 1.0, "data": "U", "tilt": 0.0, "shift": 0.0, "R": 100.0, "csv": "",
      "init_front": 0.1, "fb_tol": 0.004, "max_iter": 60, "front_tol_cells": 2.0, "alpha_tol": 0.05
    },
    "solve_linear": {
      "n": 2, "h": 0.015625, "box": 0.5, "data": "minimizer", "csv": "", "cg_tol": 1e-11,
      "order_h": [0.0625, 0.03125, 0.015625], "b_factor": 3.0, "counterexample_tol": 0.05,
      "conformal_hs": [0.03125, 0.015625, 0.0078125], "conformal_amp": 0.3, "conformal_stability": 0.05
    },
    "flatness": {
      "n": 2, "h": 0.015625, "box": 0.5, "data": "tilted", "eps": 0.25, "tilt": 0.4, "m_max": 10,
      "slope_tol": 0.1, "iof_eps": 0.1, "iof_rho": 0.5
    }
  })");
  return d;
}

const std::map<std::string, std::vector<std::string>>& sections_of() {
  static const std::map<std::string, std::vector<std::string>> m{
      {"eval-u", {"eval_u"}},
      {"check-barrier", {"check_barrier"}},
      {"domain-variation", {"domain_variation"}},
      {"solve-fb", {"solve_fb"}},
      {"solve-linear", {"solve_linear"}},
      {"flatness", {"flatness"}},
      {"verify-all", {"eval_u", "check_barrier", "domain_variation", "solve_fb", "solve_linear", "flatness"}}};
  return m;
}

std::string json_type(const nlohmann::json& v) {
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  return v.type_name();
}

void check_type(const ojson& def, const nlohmann::json& v, const std::string& path) {
  const bool ok = def.is_number_integer() ? v.is_number_integer()
                  : def.is_number()       ? v.is_number()
                                          : def.type() == v.type();
  if (!ok) throw ConfigError(path, "expected " + json_type(def) + ", got " + json_type(v));
  if (def.is_array() && !def.empty())
    for (std::size_t i = 0; i < v.size(); ++i) check_type(def[0], v[i], path + "[" + std::to_string(i) + "]");
}

void require(bool cond, const std::string& path, const std::string& what) {
  if (!cond) throw ConfigError(path, what);
}

void check_multiple(double box, double h, const std::string& hpath, const std::string& boxpath) {
  require(h > 0.0, hpath, "must be positive");
  require(box > 0.0, boxpath, "must be positive");
  const double q = box / h;
  require(std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, q) && std::round(q) >= 1, hpath,
          "must divide the box radius");
}

void check_n(const ojson& s, const std::string& path) {
  const int n = s["n"];
  require(n == 1 || n == 2, path + ".n", "must be 1 or 2");
}

void check_section(const std::string& name, const ojson& s) {
  const std::string p = "$." + name;
  if (name == "eval_u") {
    require(s["samples"].get<int>() > 0, p + ".samples", "must be positive");
    for (std::size_t i = 0; i < s["order_h"].size(); ++i)
      check_multiple(s["field_box"], s["order_h"][i], p + ".order_h[" + std::to_string(i) + "]", p + ".field_box");
    require(s["order_h"].size() >= 2, p + ".order_h", "needs at least two spacings");
    require(s["order_point"].size() == 2, p + ".order_point", "expected (x_n, z)");
    check_multiple(s["field_box"], s["field_h"], p + ".field_h", p + ".field_box");
  } else if (name == "check_barrier") {
    check_n(s, p);
    require(s["R"].get<double>() >= 0.0, p + ".R", "must be nonnegative");
    require(s["sample_count"].get<int>() >= 2, p + ".sample_count", "must be at least 2");
    require(s["expansion_radii"].size() >= 2, p + ".expansion_radii", "needs at least two radii");
    require(!s["tilde_R"].empty(), p + ".tilde_R", "must not be empty");
    require(s["shift_R"].size() == 2, p + ".shift_R", "expected two radii");
  } else if (name == "domain_variation") {
    check_n(s, p);
    const int n = s["n"];
    require(s["eps"].get<double>() > 0.0, p + ".eps", "must be positive");
    require(s["rho"].get<double>() > 0.0, p + ".rho", "must be positive");
    for (std::size_t i = 0; i < s["a0"].size(); ++i)
      require(s["a0"][i].size() == static_cast<std::size_t>(n - 1), p + ".a0[" + std::to_string(i) + "]",
              "needs n - 1 entries");
    require(s["samples"].get<int>() > 0, p + ".samples", "must be positive");
    require(s["scales"].get<int>() > 0, p + ".scales", "must be positive");
  } else if (name == "solve_fb") {
    check_n(s, p);
    check_multiple(s["box"], s["h"], p + ".h", p + ".box");
    const std::string data = s["data"];
    require(data == "U" || data == "tilted" || data == "barrier" || data == "csv", p + ".data",
            "must be one of U, tilted, barrier, csv");
    const double tilt = s["tilt"];
    require(std::abs(tilt) < 1.0, p + ".tilt", "must lie in (-1, 1)");
    require(data != "tilted" || s["n"].get<int>() == 2, p + ".data", "tilted data needs n = 2");
    require(data != "csv" || !s["csv"].get<std::string>().empty(), p + ".csv", "path required for csv data");
    require(s["max_iter"].get<int>() > 0, p + ".max_iter", "must be positive");
  } else if (name == "solve_linear") {
    check_n(s, p);
    check_multiple(s["box"], s["h"], p + ".h", p + ".box");
    const std::string data = s["data"];
    require(data == "minimizer" || data == "r" || data == "csv", p + ".data", "must be one of minimizer, r, csv");
    require(data != "csv" || !s["csv"].get<std::string>().empty(), p + ".csv", "path required for csv data");
    auto fits = [&](double h) { return s["box"].get<double>() / h > 16.0 + 1e-9; };
    require(fits(s["h"]), p + ".h", "the b fit needs box / h > 16");
    for (std::size_t i = 0; i < s["order_h"].size(); ++i) {
      check_multiple(s["box"], s["order_h"][i], p + ".order_h[" + std::to_string(i) + "]", p + ".box");
    }
    for (std::size_t i = 0; i < s["conformal_hs"].size(); ++i) {
      const double hs = s["conformal_hs"][i];
      require(hs > 0.0 && hs <= 0.25, p + ".conformal_hs[" + std::to_string(i) + "]", "must lie in (0, 1/4]");
    }
  } else if (name == "flatness") {
    check_n(s, p);
    check_multiple(s["box"], s["h"], p + ".h", p + ".box");
    const std::string data = s["data"];
    require(data == "tilted" || data == "fb", p + ".data", "must be tilted or fb");
    const double h = s["h"], eps = s["eps"];
    require(eps >= 4.0 * h, p + ".eps", "must be at least 4h");
    require(std::abs(s["tilt"].get<double>()) < 1.0, p + ".tilt", "must lie in (-1, 1)");
    require(s["n"].get<int>() == 2 || s["tilt"].get<double>() == 0.0, p + ".tilt", "n = 1 admits no tilt");
    require(s["iof_eps"].get<double>() > 0.0 && s["iof_eps"].get<double>() <= 0.5, p + ".iof_eps",
            "must lie in (0, 1/2]");
    require(s["iof_rho"].get<double>() > 0.0 && s["iof_rho"].get<double>() <= s["box"].get<double>(),
            p + ".iof_rho", "must lie in (0, box]");
  }
}

// ---------------------------------------------------------------------------
// Artifacts: buffered in memory, written together at the end.
// ---------------------------------------------------------------------------

struct Artifacts {
  std::string banner;  // "thinfb <version> config fnv1a:<hash>"
  std::string hash;
  std::vector<std::pair<fs::path, std::string>> files;

  void csv(const fs::path& p, const std::string& body) { files.emplace_back(p, "# " + banner + "\n" + body); }
  void json(const fs::path& p, ojson j) {
    ojson out;
    out["tool_version"] = kToolVersion;
    out["config_hash"] = hash;
    for (auto& [k, v] : j.items()) out[k] = v;
    files.emplace_back(p, out.dump(2) + "\n");
  }
};

struct Cert {
  std::string id;
  bool pass = false;
  double margin = 0.0;
};

struct Report {
  std::vector<Cert> certs;
  ojson constants = ojson::object();
  void add(const std::string& id, bool pass, double margin) { certs.push_back({id, pass, margin}); }
};

ojson certs_json(const std::vector<Cert>& certs) {
  ojson a = ojson::array();
  for (const auto& c : certs) a.push_back({{"id", c.id}, {"pass", c.pass}, {"margin", c.margin}});
  return a;
}

std::string csv_of(const std::function<void(std::ostream&)>& w) {
  std::ostringstream os;
  w(os);
  return os.str();
}

double max_abs_diff(const GridField& a, const GridField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

GridField load_csv_field(const std::string& path, const std::string& key, int n, double h, double box) {
  std::ifstream is(path);
  if (!is) throw ConfigError(key, "cannot open " + path);
  GridField g = read_field_csv(is, key);
  const Lattice& lat = g.lattice();
  const Lattice want = Lattice::box(n, h, box);
  if (lat.n() != n || std::abs(lat.h() - h) > 1e-12 * h || lat.size() != want.size())
    throw ConfigError(key, "field lattice does not match n, h and box");
  return g;
}

GridField sample_tilted_U(const Lattice& lat, double sin_phi, double shift, double scale = 1.0) {
  const double cos_phi = std::sqrt(1.0 - sin_phi * sin_phi);
  return GridField::sample(lat, [&](const PointXZ& X) {
    const double xp = X.xprime.empty() ? 0.0 : X.xprime[0];
    return scale * eval_U(xp * sin_phi + X.xn * cos_phi - shift, X.z);
  });
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

void run_eval_u(const ojson& s, std::uint64_t seed, const fs::path& dir, Artifacts& art, Report& rep) {
  // closed-form identities on random points of the ball, off L
  Rng rng(seed);
  const int count = s["samples"];
  const double radius = s["radius"];
  double e_id = 0.0, e_even = 0.0, e_hom = 0.0;
  for (int k = 0; k < count; ++k) {
    const auto p = ball_point(rng, 2, radius);
    const double t = p[0], z = p[1], lambda = rng.uniform(0.25, 4.0);
    if (t == 0.0 && z == 0.0) continue;
    const double u = eval_U(t, z);
    e_id = std::max(e_id, std::abs(2.0 * std::hypot(t, z) * eval_Un(t, z) - u));
    e_even = std::max(e_even, std::abs(eval_U(t, -z) - u));
    e_hom = std::max(e_hom, std::abs(eval_U(lambda * t, lambda * z) - std::sqrt(lambda) * u));
  }
  const double tol = s["identity_tol"];
  rep.add("u_identity_2rUn", e_id <= tol, tol - e_id);
  rep.add("u_evenness", e_even <= tol, tol - e_even);
  rep.add("u_homogeneity", e_hom <= tol, tol - e_hom);

  // residual of the discrete Laplacian at a fixed node, for U and U_n v (n = 1)
  const double px = s["order_point"][0], pz = s["order_point"][1];
  std::vector<double> hs = s["order_h"].get<std::vector<double>>(), res_u, res_v;
  for (double h : hs) {
    const Lattice lat = Lattice::box(1, h, s["field_box"]);
    const Index X = node_of(lat, PointXZ{{}, px, pz});
    res_u.push_back(std::abs(discrete_laplacian(GridField::sample(lat, [](const PointXZ& p) { return eval_U(p); }), X)));
    res_v.push_back(std::abs(discrete_laplacian(
        GridField::sample(lat, [](const PointXZ& p) {
          return p.r() == 0.0 ? 0.0 : eval_Un(p) * explicit_minimizer(p, 1);
        }),
        X)));
  }
  const double otol = s["order_tol"];
  double worst_u = 1e300, worst_v = 1e300;
  ojson ratios = ojson::array();
  for (std::size_t i = 0; i + 1 < hs.size(); ++i) {
    // second order: the residual ratio is (h_i / h_{i+1})^2, 4 for halving
    const double expect = (hs[i] / hs[i + 1]) * (hs[i] / hs[i + 1]);
    const double ru = res_u[i] / res_u[i + 1], rv = res_v[i] / res_v[i + 1];
    worst_u = std::min(worst_u, otol * expect - std::abs(ru - expect));
    worst_v = std::min(worst_v, otol * expect - std::abs(rv - expect));
    ratios.push_back({{"U", ru}, {"Un_v", rv}});
  }
  rep.add("u_harmonic_order", worst_u >= 0.0, worst_u);
  rep.add("un_v_harmonic_order", worst_v >= 0.0, worst_v);

  const Lattice field_lat = Lattice::box(1, s["field_h"], s["field_box"]);
  const GridField u = GridField::sample(field_lat, [](const PointXZ& p) { return eval_U(p); });
  art.csv(dir / "u_field.csv", csv_of([&](std::ostream& os) { write_field_csv(os, u); }));
  art.json(dir / "eval_u.json", {{"identity_errors", {{"2rUn", e_id}, {"evenness", e_even}, {"homogeneity", e_hom}}},
                                 {"order_h", hs},
                                 {"residual_U", res_u},
                                 {"residual_Un_v", res_v},
                                 {"ratios", ratios}});
}

void run_check_barrier(const ojson& s, std::uint64_t seed, const fs::path& dir, Artifacts& art, Report& rep) {
  const int n = s["n"];
  const double R = s["R"];
  const Certificate sub = certify_subharmonicity({n, R, 0.0}, s["sample_count"]);
  rep.add("barrier_subharmonicity", sub.pass, sub.worst_margin);
  rep.constants["R_min"] = sub.constants.at("R_min");

  BarrierScan scan;
  scan.seed = seed;
  const std::vector<double> radii = s["expansion_radii"];
  const std::vector<double> e = verify_fb_expansion({n, R, 0.0}, radii, scan);
  double dec = 1e300;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) dec = std::min(dec, e[i] - e[i + 1]);
  rep.add("barrier_fb_expansion", dec > 0.0, dec);
  std::ostringstream ecsv;
  ecsv << "s,sup_ratio_minus_1\n" << std::setprecision(17);
  for (std::size_t i = 0; i < e.size(); ++i) ecsv << radii[i] << ',' << e[i] << '\n';
  art.csv(dir / "fb_expansion.csv", ecsv.str());

  ojson tilde = ojson::array();
  double lo = 1e300, hi = 0.0;
  long failures = 0;
  for (double Rt : s["tilde_R"].get<std::vector<double>>()) {
    const TildeEstimate est = verify_tilde_estimate({n, Rt, 0.0}, s["tilde_ball"], scan);
    lo = std::min(lo, est.C_meas);
    hi = std::max(hi, est.C_meas);
    failures += est.bracket_failures;
    tilde.push_back({{"R", Rt}, {"C_meas", est.C_meas}, {"samples", est.samples}, {"bracket_failures", est.bracket_failures}});
  }
  const double factor = s["tilde_factor"];
  rep.add("barrier_tilde_estimate", failures == 0 && hi <= factor * lo, factor * lo - hi);
  rep.constants["tilde_C_meas_max"] = hi;

  ShiftScan sscan;
  sscan.R_ref = s["shift_R"][0];
  const ShiftReport cal = calibrate_shift_constants(n, sscan);
  ojson shift = {{"calibrated", cal.calibrated},
                 {"c0", cal.constants.c0},
                 {"C0", cal.constants.C0},
                 {"C1", cal.constants.C1},
                 {"delta", cal.constants.delta}};
  static const char* ids[] = {"shift_upper", "shift_gain", "shift_below"};
  if (!cal.calibrated) {
    for (const char* id : ids) rep.add(id, false, 0.0);
    rep.add("shift_scaling", false, 0.0);
  } else {
    const ShiftReport r0 = verify_shift_inequalities({n, sscan.R_ref, 0.0}, cal.constants, sscan);
    const ShiftReport r1 = verify_shift_inequalities({n, s["shift_R"][1].get<double>(), 0.0}, cal.constants, sscan);
    const double expect = s["shift_R"][1].get<double>() / sscan.R_ref, stol = s["shift_scaling_tol"];
    double scaling = 1e300;
    ojson margins = ojson::array();
    for (int i = 0; i < 3; ++i) {
      rep.add(ids[i], r0.certs[i].pass && r1.certs[i].pass, std::min(r0.certs[i].worst_margin, r1.certs[i].worst_margin));
      const double ratio = r0.certs[i].worst_margin / r1.certs[i].worst_margin;
      scaling = std::min(scaling, stol * expect - std::abs(ratio - expect));
      margins.push_back({{"id", ids[i]}, {"margin_R0", r0.certs[i].worst_margin}, {"margin_R1", r1.certs[i].worst_margin}});
    }
    rep.add("shift_scaling", scaling >= 0.0, scaling);
    shift["margins"] = margins;
    rep.constants["c0"] = cal.constants.c0;
    rep.constants["C0"] = cal.constants.C0;
    rep.constants["C1"] = cal.constants.C1;
    rep.constants["delta"] = cal.constants.delta;
  }
  art.json(dir / "barrier.json", {{"R", R},
                                  {"R_min", sub.constants.at("R_min")},
                                  {"subharmonicity_margin", sub.worst_margin},
                                  {"fb_expansion", e},
                                  {"tilde", tilde},
                                  {"shift", shift}});
}

void run_domain_variation(const ojson& s, std::uint64_t seed, const fs::path& dir, Artifacts& art, Report& rep) {
  const int n = s["n"];
  const double eps = s["eps"], rho = s["rho"], tol = s["tol"];
  Rng rng(seed);
  std::vector<PointXZ> pts;
  for (int k = 0; k < s["samples"].get<int>(); ++k) {
    const auto p = ball_point(rng, n + 1, rho);
    PointXZ X;
    if (n == 2) X.xprime = {p[0]};
    X.xn = p[n - 1];
    X.z = p[n];
    pts.push_back(X);
  }
  double worst = 0.0;
  long checked = 0;
  ojson per = ojson::array();
  for (std::size_t c = 0; c < s["a0"].size(); ++c) {
    const std::vector<double> a0 = s["a0"][c];
    std::vector<PointXZ> used;
    for (const auto& X : pts)
      if (std::abs(oracle_variation_rotated(a0, rho, eps, X)) <= 1.0) used.push_back(X);
    const auto samples = compute_variations(rotated_profile(a0, rho, eps), eps, used);
    double err = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double w = oracle_variation_rotated(a0, rho, eps, used[i]);
      err = samples[i].values.size() == 1 ? std::max(err, std::abs(samples[i].values[0] - w))
                                          : std::numeric_limits<double>::infinity();
    }
    worst = std::max(worst, err);
    checked += static_cast<long>(used.size());
    per.push_back({{"a0", a0}, {"points", used.size()}, {"max_error", err}});
    const auto rows = build_envelopes(samples, dyadic_balls(PointXZ{std::vector<double>(n - 1, 0.0), 0.0, 0.0}, rho,
                                                            s["eta"], s["scales"]));
    art.csv(dir / ("envelopes_" + std::to_string(c) + ".csv"),
            csv_of([&](std::ostream& os) { write_envelope_csv(os, rows); }));
  }
  rep.add("variation_oracle", worst <= tol, tol - worst);
  art.json(dir / "domain_variation.json", {{"eps", eps}, {"rho", rho}, {"checked", checked}, {"max_error", worst}, {"cases", per}});
}

void run_solve_fb(const ojson& s, std::uint64_t, const fs::path& dir, Artifacts& art, Report& rep) {
  const int n = s["n"];
  const double h = s["h"], box = s["box"], shift = s["shift"];
  const std::string data = s["data"];
  const Lattice lat = Lattice::box(n, h, box);
  const double tilt = data == "tilted" ? s["tilt"].get<double>() : 0.0;
  GridField boundary;
  if (data == "U" || data == "tilted") {
    boundary = sample_tilted_U(lat, tilt, shift);
  } else if (data == "barrier") {
    const BarrierSpec b{n, s["R"], shift};
    boundary = GridField::sample(lat, [&](const PointXZ& X) { return eval_vR(b, X); });
  } else {
    boundary = load_csv_field(s["csv"], "$.solve_fb.csv", n, h, box);
  }
  SolverConfig cfg;
  cfg.fb_tol = s["fb_tol"];
  cfg.max_iter = s["max_iter"];
  const FBSolution sol = solve_fb(boundary, PlateState::flat(lat, s["init_front"]), cfg);

  const double fb_tol = cfg.fb_tol;
  rep.add("fb_converged", sol.converged, sol.log.empty() ? -1.0 : fb_tol - sol.log.back().model_dev);
  double alpha_dev = 0.0, front_err = 0.0;
  const std::vector<int> cols = measurable_columns(sol.plate);
  const double cos_phi = std::sqrt(1.0 - tilt * tilt);
  for (int c : cols) {
    alpha_dev = std::max(alpha_dev, std::abs(sol.alpha[c] - 1.0));
    const double truth = (shift - tilt * sol.plate.column_coord(c)) / cos_phi;
    front_err = std::max(front_err, std::abs(sol.plate.front()[c] - truth));
  }
  const double atol = s["alpha_tol"];
  rep.add("fb_alpha", !cols.empty() && alpha_dev <= atol, atol - alpha_dev);
  if (data == "U" || data == "tilted") {
    const double ftol = s["front_tol_cells"].get<double>() * h;
    rep.add("fb_front", !cols.empty() && front_err <= ftol, ftol - front_err);
  }
  rep.constants["fb_iterations"] = static_cast<double>(sol.log.size());

  ojson log = ojson::array();
  for (const auto& it : sol.log)
    log.push_back({{"iter", it.iter},
                   {"max_dev", it.max_dev},
                   {"model_dev", it.model_dev},
                   {"max_move", it.max_move},
                   {"step", it.step},
                   {"cg_iterations", it.cg_iterations}});
  art.csv(dir / "fb_field.csv", csv_of([&](std::ostream& os) { write_field_csv(os, sol.g); }));
  art.json(dir / "plate.json", ojson::parse(plate_json(sol.plate)));
  art.json(dir / "solve_fb.json", {{"converged", sol.converged},
                                   {"diverged", sol.diverged},
                                   {"max_alpha_dev", alpha_dev},
                                   {"front_error", front_err},
                                   {"report", sol.report},
                                   {"log", log}});
}

void run_solve_linear(const ojson& s, std::uint64_t, const fs::path& dir, Artifacts& art, Report& rep) {
  const int n = s["n"];
  const double box = s["box"];
  const std::string data = s["data"];
  CgOptions opt;
  opt.tol = s["cg_tol"];
  opt.max_iter = 100000;
  const std::vector<double> xp0(n - 1, 0.0);
  auto sample = [&](double h) {
    const Lattice lat = Lattice::box(n, h, box);
    if (data == "minimizer") return GridField::sample(lat, [n](const PointXZ& X) { return explicit_minimizer(X, n); });
    if (data == "r") return GridField::sample(lat, [](const PointXZ& X) { return X.r(); });
    return load_csv_field(s["csv"], "$.solve_linear.csv", n, h, box);
  };
  ojson out;
  const double h = s["h"];
  const GridField boundary = sample(h);
  const LinearSolveResult res = solve_weighted_energy(boundary, opt);
  out["energy"] = res.energy;
  out["cg_iterations"] = res.iterations;

  if (data == "minimizer") {
    const double b_oracle = extract_b(boundary, xp0), b = extract_b(res.field.w, xp0);
    const double bound = s["b_factor"].get<double>() * std::abs(b_oracle);
    rep.add("linear_b_oracle", std::abs(b) <= bound, bound - std::abs(b));
    out["b"] = b;
    out["b_oracle"] = b_oracle;
    out["error"] = max_abs_diff(res.field.w, boundary);

    std::vector<double> hs = s["order_h"], errs;
    for (double hh : hs) {
      const GridField v = hh == h ? boundary : sample(hh);
      errs.push_back(hh == h ? out["error"].get<double>() : max_abs_diff(solve_weighted_energy(v, opt).field.w, v));
    }
    if (hs.size() >= 2) {
      double order = 1e300;
      for (std::size_t i = 0; i + 1 < hs.size(); ++i)
        order = std::min(order, std::log(errs[i] / errs[i + 1]) / std::log(hs[i] / hs[i + 1]));
      rep.add("linear_order", order >= 1.0, order - 1.0);
      rep.constants["linear_order"] = order;
      out["order_h"] = hs;
      out["order_errors"] = errs;
    }
  }
  if (data == "minimizer" || data == "r") {
    // counterexample detection: the U_n-harmonic extension of r keeps b = 1
    const Lattice lat = Lattice::box(n, h, box);
    const GridField r = GridField::sample(lat, [](const PointXZ& X) { return X.r(); });
    const double b_ext = extract_b(un_harmonic_extension(r, opt), xp0);
    const double tol = s["counterexample_tol"];
    rep.add("linear_counterexample", std::abs(b_ext - 1.0) <= tol, tol - std::abs(b_ext - 1.0));
    out["b_extension_of_r"] = b_ext;
  }

  const std::vector<double> chs = s["conformal_hs"];
  if (!chs.empty()) {
    const double c = s["conformal_amp"];
    auto data_fn = [c](double t, double z) {
      const double r = std::hypot(t, z), th = slit_angle(t, z);
      return std::sqrt(r) * std::cos(0.5 * th) + c * std::pow(r, 1.5) * std::cos(1.5 * th);
    };
    std::vector<double> C0;
    for (double hs : chs) C0.push_back(measure_HaU_constant(solve_2d_slit_rhs([](double, double) { return 0.0; }, data_fn, hs)));
    if (C0.size() >= 2) {
      const double stab = s["conformal_stability"];
      const double change = std::abs(C0[C0.size() - 1] - C0[C0.size() - 2]) / C0.back();
      rep.add("conformal_C0_stable", change <= stab, stab - change);
    }
    rep.constants["conformal_C0"] = C0.back();
    out["conformal_hs"] = chs;
    out["conformal_C0"] = C0;
  }

  std::ostringstream bcsv;
  bcsv << "xprime,b\n" << std::setprecision(17);
  for (const auto& bs : res.b_samples) bcsv << bs.xprime << ',' << bs.b << '\n';
  art.csv(dir / "b_samples.csv", bcsv.str());
  art.csv(dir / "linear_field.csv", csv_of([&](std::ostream& os) { write_field_csv(os, res.field.w); }));
  art.json(dir / "solve_linear.json", out);
}

void run_flatness(const ojson& s, std::uint64_t, const fs::path& dir, Artifacts& art, Report& rep) {
  const int n = s["n"];
  const double h = s["h"], box = s["box"], eps = s["eps"], tilt = s["tilt"];
  const Lattice lat = Lattice::box(n, h, box);
  const PointXZ origin{std::vector<double>(n - 1, 0.0), 0.0, 0.0};
  GridField g = sample_tilted_U(lat, tilt, 0.0);
  if (s["data"] == "fb") g = solve_fb(g, PlateState::flat(lat, 0.0)).g;

  const CascadeResult c = harnack_cascade(g, eps, origin, s["m_max"]);
  const double stol = s["slope_tol"];
  if (s["data"] == "tilted") {
    const double dev = c.fit.sufficient ? std::abs(c.fit.slope_log_rho - 1.0) : 1e300;
    rep.add("decay_slope", c.fit.sufficient && dev <= stol, c.fit.sufficient ? stol - dev : -1.0);
  } else {
    const bool ok = c.fit.scales >= 2 && c.fit.eta_meas > 0.0 && c.fit.eta_meas < 1.0;
    rep.add("decay_recorded", ok, ok ? std::min(c.fit.eta_meas, 1.0 - c.fit.eta_meas) : -1.0);
  }
  rep.constants["eta_meas"] = c.fit.eta_meas;

  // improvement of flatness: a rotated profile with |nu0 - e_n| = iof_eps, and 1.5 U
  const double ieps = s["iof_eps"], irho = s["iof_rho"];
  ojson iof = ojson::array();
  if (n == 2) {
    const double phi0 = 2.0 * std::asin(0.5 * ieps);
    const FlatnessImprovement r = improvement_of_flatness_check(sample_tilted_U(lat, std::sin(phi0), 0.0), ieps, irho);
    const double dnu = std::hypot(r.nu[0] - std::sin(phi0), r.nu[1] - std::cos(phi0));
    rep.add("iof_rotated", r.found, r.allowed - r.half_width);
    iof.push_back({{"case", "rotated"}, {"found", r.found}, {"nu", r.nu}, {"nu_error", dnu}, {"half_width", r.half_width}, {"allowed", r.allowed}});
  } else {
    const FlatnessImprovement r = improvement_of_flatness_check(sample_tilted_U(lat, 0.0, 0.0), ieps, irho);
    rep.add("iof_rotated", r.found, r.allowed - r.half_width);
    iof.push_back({{"case", "U"}, {"found", r.found}, {"half_width", r.half_width}, {"allowed", r.allowed}});
  }
  const FlatnessImprovement bad = improvement_of_flatness_check(sample_tilted_U(lat, 0.0, 0.0, 1.5), ieps, irho);
  rep.add("iof_rejects_1.5U", !bad.found, bad.half_width - bad.allowed);
  iof.push_back({{"case", "1.5U"}, {"found", bad.found}, {"half_width", bad.half_width}, {"allowed", bad.allowed}});

  art.csv(dir / "decay.csv", csv_of([&](std::ostream& os) { write_decay_csv(os, c.records); }));
  art.json(dir / "flatness.json", {{"fit",
                                    {{"eta_meas", c.fit.eta_meas},
                                     {"decay_factor", c.fit.decay_factor},
                                     {"slope_log_rho", c.fit.slope_log_rho},
                                     {"residual", c.fit.residual},
                                     {"scales", c.fit.scales},
                                     {"sufficient", c.fit.sufficient}}},
                                   {"cutoff", c.cutoff},
                                   {"report", c.report},
                                   {"improvement", iof}});
}

using Runner = void (*)(const ojson&, std::uint64_t, const fs::path&, Artifacts&, Report&);

const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> m{{"eval_u", run_eval_u},
                                               {"check_barrier", run_check_barrier},
                                               {"domain_variation", run_domain_variation},
                                               {"solve_fb", run_solve_fb},
                                               {"solve_linear", run_solve_linear},
                                               {"flatness", run_flatness}};
  return m;
}

void write_all(const std::vector<std::pair<fs::path, std::string>>& files, std::vector<fs::path>& written) {
  for (const auto& [p, body] : files) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    written.push_back(p);
    os << body;
    if (!os.flush()) throw std::runtime_error("cannot write " + p.string());
  }
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> v{"eval-u",       "check-barrier", "domain-variation", "solve-fb",
                                          "solve-linear", "flatness",      "verify-all"};
  return v;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ojson normalize_config(const std::string& subcommand, const nlohmann::json& raw, std::optional<std::uint64_t> seed) {
  const auto sec = sections_of().find(subcommand);
  if (sec == sections_of().end()) throw ConfigError("$", "unknown subcommand " + subcommand);
  if (!raw.is_object()) throw ConfigError("$", "config must be a JSON object");
  const ojson& defs = section_defaults();
  for (auto it = raw.begin(); it != raw.end(); ++it) {
    const std::string& k = it.key();
    if (k == "schema_version" || k == "seed") continue;
    if (!defs.contains(k)) throw ConfigError("$." + k, "unknown key");
    if (!it->is_object()) throw ConfigError("$." + k, "expected object");
    for (auto jt = it->begin(); jt != it->end(); ++jt) {
      const std::string path = "$." + k + "." + jt.key();
      if (!defs[k].contains(jt.key())) throw ConfigError(path, "unknown key");
      check_type(defs[k][jt.key()], *jt, path);
    }
  }
  if (raw.contains("schema_version")) {
    const auto& v = raw["schema_version"];
    if (!v.is_number_integer() || v.get<int>() != kSchemaVersion)
      throw ConfigError("$.schema_version", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  std::uint64_t sd = 1;
  if (raw.contains("seed")) {
    if (!raw["seed"].is_number_unsigned() && !(raw["seed"].is_number_integer() && raw["seed"].get<long long>() >= 0))
      throw ConfigError("$.seed", "expected a nonnegative integer");
    sd = raw["seed"].get<std::uint64_t>();
  }
  if (seed) sd = *seed;

  ojson out;
  out["schema_version"] = kSchemaVersion;
  out["subcommand"] = subcommand;
  out["seed"] = sd;
  for (const auto& name : sec->second) {
    ojson s = defs[name];
    if (raw.contains(name))
      for (auto jt = raw[name].begin(); jt != raw[name].end(); ++jt) s[jt.key()] = *jt;
    check_section(name, s);
    out[name] = s;
  }
  return out;
}

RunOutcome run(const std::string& subcommand, const nlohmann::json& config, const fs::path& out_dir,
               std::optional<std::uint64_t> seed) {
  RunOutcome outcome;
  ojson cfg;
  try {
    cfg = normalize_config(subcommand, config, seed);
  } catch (const ConfigError& e) {
    outcome.exit_code = 2;
    outcome.message = e.what();
    return outcome;
  }

  Artifacts art;
  {
    std::ostringstream hs;
    hs << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(cfg.dump());
    art.hash = "fnv1a:" + hs.str();
  }
  art.banner = std::string("thinfb ") + kToolVersion + " config " + art.hash;

  Report rep;
  try {
    const bool all = subcommand == "verify-all";
    for (const auto& name : sections_of().at(subcommand)) {
      const fs::path dir = all ? out_dir / name : out_dir;
      runners().at(name)(cfg[name], cfg["seed"].get<std::uint64_t>(), dir, art, rep);
    }
  } catch (const ConfigError& e) {
    outcome.exit_code = 2;
    outcome.message = e.what();
    return outcome;
  } catch (const std::exception& e) {
    outcome.exit_code = 1;
    outcome.message = std::string("run error: ") + e.what();
    return outcome;
  }

  ojson summary;
  summary["tool_version"] = kToolVersion;
  summary["config_hash"] = art.hash;
  summary["subcommand"] = subcommand;
  summary["seed"] = cfg["seed"];
  summary["certificates"] = certs_json(rep.certs);
  summary["constants"] = rep.constants;
  art.json(out_dir / "summary.json", summary);
  art.json(out_dir / "config.json", {{"config", cfg}});

  try {
    write_all(art.files, outcome.artifacts);
  } catch (const std::exception& e) {
    std::error_code ec;
    for (const auto& p : outcome.artifacts) fs::remove(p, ec);
    outcome.artifacts.clear();
    outcome.exit_code = 1;
    outcome.message = e.what();
    return outcome;
  }
  outcome.summary = summary;
  const bool pass = std::all_of(rep.certs.begin(), rep.certs.end(), [](const Cert& c) { return c.pass; });
  outcome.exit_code = pass ? 0 : 1;
  outcome.message = pass ? "all certificates pass" : "certificate failed";
  return outcome;
}

GridField read_field_csv(std::istream& is, const std::string& key_path) {
  std::string line;
  do {
    if (!std::getline(is, line)) throw ConfigError(key_path, "empty field CSV");
  } while (!line.empty() && line[0] == '#');
  int n = 0;
  if (line == "i_xn,i_z,xn,z,value") n = 1;
  else if (line == "i_xp,i_xn,i_z,xp,xn,z,value") n = 2;
  else throw ConfigError(key_path, "unrecognized field CSV header");
  const int axes = n + 1;
  std::vector<std::array<int, 3>> idx;
  std::vector<std::array<double, 3>> xs;
  std::vector<double> vals;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::array<int, 3> ijk{0, 0, 0};
    std::array<double, 3> x{0, 0, 0};
    double v = 0.0;
    char comma = 0;
    bool ok = true;
    for (int a = 0; a < axes; ++a) ok = ok && (ls >> ijk[a] >> comma) && comma == ',';
    for (int a = 0; a < axes; ++a) ok = ok && (ls >> x[a] >> comma) && comma == ',';
    ok = ok && static_cast<bool>(ls >> v);
    if (!ok) throw ConfigError(key_path, "malformed row at line " + std::to_string(lineno));
    idx.push_back(ijk);
    xs.push_back(x);
    vals.push_back(v);
  }
  int half = 0;
  double h = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k)
    for (int a = 0; a < axes; ++a)
      if (idx[k][a] > half) half = idx[k][a], h = xs[k][a] / idx[k][a];
  if (half == 0 || !(h > 0.0)) throw ConfigError(key_path, "field CSV has no positive index");
  const Lattice lat(n, h, {half, half, half});
  if (vals.size() != lat.size()) throw ConfigError(key_path, "field CSV does not cover a cubic lattice");
  GridField g(lat, true);
  std::vector<char> seen(lat.size(), 0);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    Index ijk{0, 0, 0};
    for (int a = 0; a < axes; ++a) ijk[a] = idx[k][a];
    if (!lat.contains(ijk)) throw ConfigError(key_path, "index outside the lattice");
    const std::size_t lin = lat.linear(ijk);
    if (seen[lin]) throw ConfigError(key_path, "duplicate node");
    seen[lin] = 1;
    g[lin] = vals[k];
  }
  for (std::size_t k = 0; k < lat.size(); ++k) {
    Index m = lat.unravel(k);
    m[lat.z_axis()] = -m[lat.z_axis()];
    if (g[k] != g.at(m)) throw ConfigError(key_path, "field CSV data is not even in z");
  }
  return g;
}

}  // namespace thinfb
