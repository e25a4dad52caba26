#pragma once

// Experiment configuration and the runners behind the CLI subcommands.
// Every run is a pure function of (config, seed); reports carry no wall-clock
// data, so identical configs produce byte-identical report.json files.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plaplab/calculus.hpp"
#include "plaplab/envelope.hpp"
#include "plaplab/gallery.hpp"
#include "plaplab/grid.hpp"
#include "plaplab/report.hpp"
#include "plaplab/rng.hpp"
#include "plaplab/verify.hpp"

namespace plaplab {

// Versioned defaults; the single source for every tolerance and schedule.
// weak_tol_k is calibrated once on the affine scan family (max |R|/h is
// about 0.26 across the default grids; 1.0 keeps a ~4x margin) and is never
// tuned per test.
inline constexpr const char* kDefaultConfig = R"json({
  "config_version": 1,
  "seed": 12345,
  "entry": "neg_cone",
  "grid": {"dim": 1, "n": [257]},
  "p": 2.0,
  "q": 2.0,
  "eps": 0.1,
  "delta": 0.001,
  "eps_schedule": [0.4, 0.2, 0.1, 0.05],
  "delta_schedule": [0.01, 0.001, 0.0001, 1e-05],
  "n_schedule": [65, 129, 257],
  "trials": 100,
  "identity_points": 10000,
  "fatou_pairs": 100000,
  "grad_tol_factor": 10.0,
  "tol_first_factor": 10.0,
  "tol_second_factor": 10.0,
  "weak_tol_k": 1.0,
  "truncate_quantile": 0.75,
  "sweep": {"kind": "eps"},
  "bench": {"sizes_1d": [4097], "sizes_2d": [64, 128, 256], "qs": [2.0, 3.2], "eps": 0.05, "argmins": true}
})json";

struct RunConfig {
  Json raw;  // resolved config (defaults + file + flags), echoed into reports

  std::uint64_t seed = 12345;
  std::string entry = "neg_cone";
  int dim = 1;
  std::array<int, 2> n{257, 1};
  bool explicit_box = false;
  std::array<double, 2> lo{0, 0}, hi{0, 0};
  double p = 2.0, q = 2.0, eps = 0.1, delta = 1e-3;
  std::vector<double> eps_schedule, delta_schedule;
  std::vector<int> n_schedule;
  int trials = 100;
  int identity_points = 10000;
  int fatou_pairs = 100000;
  double grad_tol_factor = 10.0;
  double tol_first_factor = 10.0;
  double tol_second_factor = 10.0;
  double weak_tol_k = 1.0;
  double truncate_quantile = 0.75;
  std::string sweep_kind = "eps";
  std::vector<int> bench_sizes_1d, bench_sizes_2d;
  std::vector<double> bench_qs;
  double bench_eps = 0.05;
  bool bench_argmins = true;

  double grad_tol(const Grid& g) const { return grad_tol_factor * g.h_max(); }
  double weak_tol(const Grid& g) const { return weak_tol_k * g.h_max(); }

  Grid make_grid(int n_override = 0) const {
    const int nn = n_override > 0 ? n_override : n[0];
    if (entry == "random" || explicit_box) {
      Point l = explicit_box ? Point{lo[0], lo[1]} : Point{0.0, 0.0};
      Point h = explicit_box ? Point{hi[0], hi[1]} : Point{1.0, 1.0};
      return dim == 1 ? Grid::line(l[0], h[0], nn)
                      : Grid::box(l, h, nn, n_override > 0 ? n_override : n[1]);
    }
    return default_grid(gallery_entry(entry), dim, nn);
  }

  ScalarField make_field(const Grid& g) const {
    if (entry == "random") {
      CounterRng rng(seed, "field");
      std::vector<double> v(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) v[k] = rng.uniform(k);
      return ScalarField(g, std::move(v), "random");
    }
    return sample(entry, g);
  }
};

// ---------------------------------------------------------------------------
// Config loading

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline int line_of_byte(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

inline int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  return pos == std::string::npos ? 0 : line_of_byte(text, pos);
}

[[noreturn]] inline void config_fail(const std::string& source_name, const std::string& text,
                                     const std::string& key, const std::string& msg) {
  std::ostringstream os;
  os << source_name << ':' << line_of_key(text, key) << ": " << key << ": " << msg;
  throw ConfigError(os.str());
}

inline void merge_json(Json& base, const Json& over) {
  if (!over.is_object() || !base.is_object()) {
    base = over;
    return;
  }
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      merge_json(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

}  // namespace detail

inline Json parse_config_text(const std::string& text, const std::string& source_name) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::ostringstream os;
    os << source_name << ':' << detail::line_of_byte(text, e.byte) << ": " << e.what();
    throw ConfigError(os.str());
  }
}

// Defaults, overlaid by the optional config file, overlaid by dotted-path
// overrides ("bench.eps=0.01").
inline Json resolve_config_json(const std::string& file_path,
                                const std::vector<std::string>& overrides) {
  Json cfg = Json::parse(kDefaultConfig);
  if (!file_path.empty()) {
    std::ifstream is(file_path);
    if (!is) throw ConfigError("cannot open config file: " + file_path);
    std::stringstream ss;
    ss << is.rdbuf();
    detail::merge_json(cfg, parse_config_text(ss.str(), file_path));
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + ov);
    std::string key = ov.substr(0, eq), val = ov.substr(eq + 1);
    Json* node = &cfg;
    std::size_t start = 0;
    for (;;) {
      const auto dotpos = key.find('.', start);
      const std::string part = key.substr(start, dotpos - start);
      if (dotpos == std::string::npos) {
        Json parsed;
        try {
          parsed = Json::parse(val);
        } catch (const nlohmann::json::parse_error&) {
          parsed = val;  // bare strings are fine
        }
        (*node)[part] = parsed;
        break;
      }
      node = &(*node)[part];
      start = dotpos + 1;
    }
  }
  return cfg;
}

inline RunConfig make_run_config(const Json& cfg, const std::string& source_name = "config") {
  const std::string text = cfg.dump(2);
  auto fail = [&](const std::string& key, const std::string& msg) {
    detail::config_fail(source_name, text, key, msg);
  };
  RunConfig rc;
  rc.raw = cfg;
  try {
    rc.seed = cfg.at("seed").get<std::uint64_t>();
    rc.entry = cfg.at("entry").get<std::string>();
    const Json& grid = cfg.at("grid");
    rc.dim = grid.at("dim").get<int>();
    auto ns = grid.at("n").get<std::vector<int>>();
    if (ns.empty()) fail("grid", "n must list one count per axis");
    rc.n[0] = ns[0];
    rc.n[1] = ns.size() > 1 ? ns[1] : ns[0];
    if (grid.contains("lo") != grid.contains("hi")) fail("grid", "lo and hi come together");
    if (grid.contains("lo")) {
      rc.explicit_box = true;
      auto los = grid.at("lo").get<std::vector<double>>();
      auto his = grid.at("hi").get<std::vector<double>>();
      if (static_cast<int>(los.size()) < rc.dim || static_cast<int>(his.size()) < rc.dim)
        fail("grid", "lo/hi need one bound per axis");
      for (int a = 0; a < rc.dim; ++a) {
        rc.lo[a] = los[a];
        rc.hi[a] = his[a];
      }
    }
    rc.p = cfg.at("p").get<double>();
    rc.q = cfg.at("q").get<double>();
    rc.eps = cfg.at("eps").get<double>();
    rc.delta = cfg.at("delta").get<double>();
    rc.eps_schedule = cfg.at("eps_schedule").get<std::vector<double>>();
    rc.delta_schedule = cfg.at("delta_schedule").get<std::vector<double>>();
    rc.n_schedule = cfg.at("n_schedule").get<std::vector<int>>();
    rc.trials = cfg.at("trials").get<int>();
    rc.identity_points = cfg.at("identity_points").get<int>();
    rc.fatou_pairs = cfg.at("fatou_pairs").get<int>();
    rc.grad_tol_factor = cfg.at("grad_tol_factor").get<double>();
    rc.tol_first_factor = cfg.at("tol_first_factor").get<double>();
    rc.tol_second_factor = cfg.at("tol_second_factor").get<double>();
    rc.weak_tol_k = cfg.at("weak_tol_k").get<double>();
    rc.truncate_quantile = cfg.at("truncate_quantile").get<double>();
    rc.sweep_kind = cfg.at("sweep").at("kind").get<std::string>();
    const Json& bench = cfg.at("bench");
    rc.bench_sizes_1d = bench.at("sizes_1d").get<std::vector<int>>();
    rc.bench_sizes_2d = bench.at("sizes_2d").get<std::vector<int>>();
    rc.bench_qs = bench.at("qs").get<std::vector<double>>();
    rc.bench_eps = bench.at("eps").get<double>();
    rc.bench_argmins = bench.at("argmins").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(source_name + ": " + e.what());
  }

  if (!(rc.p > 1.0)) fail("p", "need p > 1");
  if (!(rc.q >= 2.0)) fail("q", "need q >= 2");
  if (!(rc.eps > 0.0)) fail("eps", "need eps > 0");
  if (!(rc.delta > 0.0)) fail("delta", "need delta > 0");
  if (rc.dim != 1 && rc.dim != 2) fail("grid", "dim must be 1 or 2");
  if (rc.n[0] < 3 || (rc.dim == 2 && rc.n[1] < 3)) fail("grid", "need at least 3 nodes per axis");
  if (rc.trials < 1) fail("trials", "need at least one trial");
  if (!(rc.truncate_quantile >= 0.0 && rc.truncate_quantile <= 1.0))
    fail("truncate_quantile", "must lie in [0, 1]");
  try {
    require_strictly_monotone(rc.eps_schedule, "eps_schedule");
    require_strictly_monotone(rc.delta_schedule, "delta_schedule");
    std::vector<double> nsd(rc.n_schedule.begin(), rc.n_schedule.end());
    require_strictly_monotone(nsd, "n_schedule");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  if (rc.entry != "random") {
    const GalleryEntry& e = gallery_entry(rc.entry);  // throws on unknown names
    if (!e.supports(rc.dim)) fail("entry", "entry does not support the configured dim");
  }
  if (rc.sweep_kind != "eps" && rc.sweep_kind != "delta" && rc.sweep_kind != "h")
    fail("sweep", "kind must be eps, delta or h");
  return rc;
}

// The singular pipeline needs 1 < p < 2 and an envelope exponent beyond the
// dual exponent p/(p-1).
inline void validate_singular(const RunConfig& rc, const std::string& source_name = "config") {
  const std::string text = rc.raw.dump(2);
  if (!(rc.p < 2.0))
    detail::config_fail(source_name, text, "p", "the singular pipeline needs 1 < p < 2");
  if (!(rc.q > rc.p / (rc.p - 1.0)))
    detail::config_fail(source_name, text, "q",
                        "need q > p/(p-1) = " + std::to_string(rc.p / (rc.p - 1.0)));
}

// ---------------------------------------------------------------------------
// Output directory handling

struct Outputs {
  std::filesystem::path dir;
  bool enabled = false;

  static Outputs at(const std::string& path) {
    Outputs o;
    o.dir = path;
    o.enabled = !path.empty();
    if (o.enabled) {
      std::filesystem::create_directories(o.dir / "tables");
      std::filesystem::create_directories(o.dir / "fields");
    }
    return o;
  }

  std::string table_path(const std::string& name) const {
    return (dir / "tables" / (name + ".csv")).string();
  }
  std::string field_path(const std::string& name) const {
    return (dir / "fields" / (name + ".csv")).string();
  }

  void write_tables(const VerificationReport& rep) const {
    if (!enabled) return;
    for (const auto& c : rep.checks)
      if (!c.table.empty()) write_table_csv(c, table_path(c.name));
  }

  void write_field(const ScalarField& u, const std::string& name) const {
    if (enabled) write_field_csv(u, field_path(name));
  }

  void write_json(const Json& j, const std::string& name) const {
    if (!enabled) return;
    std::ofstream os(dir / "fields" / name, std::ios::binary);
    os << j.dump(2) << '\n';
  }
};

// ---------------------------------------------------------------------------
// Runners

// Datum field of the strongest label covering p (harmonic preferred over
// supersolution); null when the label has f == 0 or nothing covers p.
inline std::unique_ptr<ScalarField> label_datum(const GalleryEntry& e, double p, const Grid& g) {
  for (const auto& l : e.labels) {
    if (!l.covers(p) || l.role == Role::Subsolution) continue;
    if (!l.f) return nullptr;
    std::vector<double> v(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) v[k] = l.f(g.point(k), g.dim, p);
    return std::make_unique<ScalarField>(g, std::move(v), e.name + "_f");
  }
  return nullptr;
}

inline VerificationReport run_envelope_cmd(const RunConfig& rc, const Outputs& out) {
  VerificationReport rep;
  Grid g = rc.make_grid();
  ScalarField u = rc.make_field(g);
  EnvelopeResult res = inf_convolve_fast(u, {rc.eps, rc.q});
  rep.add(check_envelope_wellformed(res, u));
  out.write_field(u, "u");
  out.write_field(res.u_eps, "u_eps");
  if (out.enabled) {
    write_envelope_sidecar_csv(res, out.field_path("u_eps_argmin"));
    out.write_json(envelope_summary_json(res, u), "u_eps_summary.json");
  }
  return rep;
}

// Envelope property suite for the configured entry.
inline VerificationReport run_lemmas_cmd(const RunConfig& rc, const Outputs& out) {
  VerificationReport rep;
  Grid g = rc.make_grid();
  ScalarField u = rc.make_field(g);
  const double gtol = rc.grad_tol(g);
  double lip = std::numeric_limits<double>::quiet_NaN();
  if (rc.entry != "random") lip = gallery_entry(rc.entry).lipschitz(rc.dim);

  rep.add(check_monotone_in_eps(u, rc.q, rc.eps_schedule));
  if (!std::isnan(lip))
    rep.add(check_lipschitz_gap(u, rc.q, rc.eps_schedule, lip, rc.tol_first_factor));

  EnvelopeResult res = inf_convolve_fast(u, {rc.eps, rc.q});
  rep.add(check_envelope_wellformed(res, u));
  rep.add(check_semiconcavity(res, rc.tol_second_factor));
  rep.add(check_hessian_bound(res, gtol, rc.tol_second_factor));
  rep.add(check_critical_concavity(res, gtol, rc.tol_second_factor));
  rep.add(check_critical_touch(res, u, gtol, lip, rc.tol_first_factor));
  rep.add(argmin_distance_bound_check(res, gradient_field(res.u_eps), rc.tol_first_factor));

  // modulus of the argmin-distance map over the grid refinement schedule
  CheckResult usc;
  usc.name = "usc_modulus";
  usc.params["eps"] = rc.eps;
  usc.params["q"] = rc.q;
  for (int n : rc.n_schedule) {
    Grid gn = rc.make_grid(n);
    ScalarField un = rc.make_field(gn);
    usc.table.push_back({gn.h_max(), usc_modulus(inf_convolve_fast(un, {rc.eps, rc.q}))});
  }
  rep.add(std::move(usc));

  out.write_field(u, "u");
  out.write_field(res.u_eps, "u_eps");
  return rep;
}

inline VerificationReport run_weak_cmd(const RunConfig& rc, const Outputs& out) {
  VerificationReport rep;
  Grid g = rc.make_grid();
  ScalarField u = rc.make_field(g);
  std::unique_ptr<ScalarField> f;
  if (rc.entry != "random") f = label_datum(gallery_entry(rc.entry), rc.p, g);
  ScanParams sp;
  sp.trials = rc.trials;
  sp.tol = rc.weak_tol(g);
  sp.grad_tol = rc.grad_tol(g);
  sp.seed = rc.seed;
  rep.add(supersolution_scan(u, rc.p, f.get(), sp));
  out.write_field(u, "u");
  if (f) out.write_field(*f, "f");
  return rep;
}

inline VerificationReport run_identity_cmd(const RunConfig& rc, const Outputs& /*out*/) {
  VerificationReport rep;
  const char* names[] = {"quadratic_bowl", "radial_p15", "neg_log"};
  const ExponentTriple triples[] = {
      {1.5, 2.0, 3.0}, {1.2, 1.8, 2.5}, {2.0, 3.0, 4.0}, {1.1, 2.2, 5.0}, {2.5, 3.0, 3.5}};
  const int cells = static_cast<int>(3 * std::size(triples));
  const int per_cell = std::max(1, (rc.identity_points + cells - 1) / cells);
  CheckResult c;
  c.name = "pointwise_identity";
  c.params["points_per_case"] = per_cell;
  const CounterRng rng(rc.seed, "identity_pts");
  std::uint64_t ctr = 0;
  double worst = 0.0;
  std::size_t tested = 0;
  for (const char* name : names) {
    const GalleryEntry& e = gallery_entry(name);
    for (const auto& t : triples) {
      for (int i = 0; i < per_cell; ++i) {
        Point x{rng.uniform(ctr++, e.box_lo[0], e.box_hi[0]),
                rng.uniform(ctr++, e.box_lo[1], e.box_hi[1])};
        if (e.smooth_distance(x, 2) < 0.05 || norm(e.grad(x, 2), 2) < 1e-6) continue;
        const double r = pointwise_identity_residual(e, x, 2, t);
        worst = std::max(worst, r);
        ++tested;
        if (r > 1e-10) c.add_violation(tested, x, r - 1e-10);
      }
    }
  }
  c.params["points_tested"] = tested;
  c.min_residual = worst;
  rep.add(std::move(c));
  return rep;
}

// Full singular-case pipeline: truncate, inf-convolve with q > p/(p-1),
// Hessian and critical-set bounds, sign condition, weak form against the
// windowed datum, and the sampled Fatou bound.
inline VerificationReport run_singular_cmd(const RunConfig& rc, const Outputs& out) {
  validate_singular(rc);
  VerificationReport rep;
  Grid g = rc.make_grid();
  ScalarField u0 = rc.make_field(g);
  auto [M, m] = oscillation(u0);
  ScalarField u = truncate(u0, m + rc.truncate_quantile * (M - m));
  const double gtol = rc.grad_tol(g);
  double lip = std::numeric_limits<double>::quiet_NaN();
  if (rc.entry != "random") lip = gallery_entry(rc.entry).lipschitz(rc.dim);

  EnvelopeResult res = inf_convolve_fast(u, {rc.eps, rc.q});
  rep.add(check_envelope_wellformed(res, u));
  rep.add(check_hessian_bound(res, gtol, rc.tol_second_factor));
  rep.add(check_critical_concavity(res, gtol, rc.tol_second_factor));

  std::unique_ptr<ScalarField> f;
  if (rc.entry != "random") f = label_datum(gallery_entry(rc.entry), rc.p, g);
  std::unique_ptr<ScalarField> f_eps;
  if (f) f_eps = std::make_unique<ScalarField>(f_window_inf(*f, res.r_eps));

  rep.add(critical_sign_check(u, res, f.get(), rc.p, rc.q, gtol, lip, rc.tol_first_factor));

  ScanParams sp;
  sp.trials = rc.trials;
  sp.tol = rc.weak_tol(g);
  sp.grad_tol = gtol;
  sp.extra_margin = res.r_eps;
  sp.seed = rc.seed;
  rep.add(supersolution_scan(res.u_eps, rc.p, f_eps.get(), sp));

  // sampled uniform lower bound for the regularized operator
  {
    CheckResult c;
    c.name = "fatou_bound_sampling";
    const double lip_bound = std::isnan(lip) ? 1.0 : lip;
    const double C = fatou_lower_bound(rc.p, rc.q, rc.eps, lip_bound, rc.dim);
    c.params["p"] = rc.p;
    c.params["q"] = rc.q;
    c.params["eps"] = rc.eps;
    c.params["lip"] = lip_bound;
    c.params["bound"] = C;
    c.params["pairs"] = rc.fatou_pairs;
    const CounterRng rng(rc.seed, "fatou_pairs");
    const double B_fac = (rc.q - 1.0) / rc.eps;
    double worst = std::numeric_limits<double>::infinity();
    for (std::uint64_t t = 0; t < static_cast<std::uint64_t>(rc.fatou_pairs); ++t) {
      const std::uint64_t b = 8 * t;
      Point gr{0.0, 0.0};
      if (rc.dim == 1) {
        gr[0] = lip_bound * rng.uniform(b, -1.0, 1.0);
      } else {
        const double ang = rng.uniform(b, 0.0, 6.283185307179586);
        const double gn = lip_bound * rng.uniform(b + 1);
        gr = {gn * std::cos(ang), gn * std::sin(ang)};
      }
      SymMat H{rng.uniform(b + 2, -3.0, 3.0), 0.0, 0.0};
      if (rc.dim == 2) {
        H.xy = rng.uniform(b + 3, -3.0, 3.0);
        H.yy = rng.uniform(b + 4, -3.0, 3.0);
      }
      const double B = B_fac * std::pow(norm(gr, rc.dim), (rc.q - 2.0) / (rc.q - 1.0));
      double lmax;
      if (rc.dim == 1) {
        lmax = H.xx;
      } else {
        const double tr = H.xx + H.yy;
        lmax = 0.5 * (tr + std::sqrt((H.xx - H.yy) * (H.xx - H.yy) + 4.0 * H.xy * H.xy));
      }
      if (lmax > B) {
        H.xx -= lmax - B;
        H.yy -= lmax - B;
      }
      const double delta = std::pow(10.0, rng.uniform(b + 5, -6.0, 0.0));
      const double v = regularized_divergence(gr, H, rc.p, delta, rc.dim);
      worst = std::min(worst, v + C);
      if (v < -C - 1e-9 * (1.0 + C)) c.add_violation(t, Point{gr[0], gr[1]}, -C - v);
    }
    c.min_residual = worst;
    rep.add(std::move(c));
  }

  out.write_field(u0, "u");
  out.write_field(u, "u_truncated");
  out.write_field(res.u_eps, "u_eps");
  if (out.enabled) {
    write_envelope_sidecar_csv(res, out.field_path("u_eps_argmin"));
    out.write_json(envelope_summary_json(res, u), "u_eps_summary.json");
    write_operator_csv(res.u_eps, rc.p, rc.delta, gtol, out.field_path("operators"));
    if (f) out.write_field(*f, "f");
    if (f_eps) out.write_field(*f_eps, "f_eps");
  }
  return rep;
}

inline VerificationReport run_sweep_cmd(const RunConfig& rc, const Outputs& /*out*/) {
  VerificationReport rep;
  if (rc.sweep_kind == "eps") {
    Grid g = rc.make_grid();
    ScalarField u = rc.make_field(g);
    CheckResult c = run_sweep("sweep_eps_gap", rc.eps_schedule, [&](double eps) {
      EnvelopeResult res = inf_convolve_fast(u, {eps, rc.q}, false);
      double gap = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k)
        gap = std::max(gap, u.values[k] - res.u_eps.values[k]);
      return gap;
    });
    if (rc.entry != "random") {
      const double lip = gallery_entry(rc.entry).lipschitz(rc.dim);
      if (!std::isnan(lip)) {
        const double rate = (1.0 - 1.0 / rc.q) * std::pow(lip, rc.q / (rc.q - 1.0));
        c.params["rate_constant"] = rate;
        for (auto& row : c.table)
          if (row.residual > rate * row.param + rc.tol_first_factor * g.h_max())
            c.add_violation(0, Point{row.param, 0}, row.residual - rate * row.param);
      }
    }
    rep.add(std::move(c));
  } else if (rc.sweep_kind == "delta") {
    Grid g = rc.make_grid();
    ScalarField u = rc.make_field(g);
    EnvelopeResult res = inf_convolve_fast(u, {rc.eps, rc.q}, false);
    GradientField gf = gradient_field(res.u_eps);
    ScanParams sp;
    sp.seed = rc.seed;
    sp.extra_margin = res.r_eps;
    const TestFunction psi = scan_trial(g, sp, 0);
    const double gtol = rc.grad_tol(g);
    const double limit = regularized_flux_sum(gf, psi, rc.p, 0.0, gtol, res.r_eps);
    CheckResult c = run_sweep("sweep_delta_flux", rc.delta_schedule, [&](double d) {
      return std::fabs(regularized_flux_sum(gf, psi, rc.p, d, gtol, res.r_eps) - limit);
    });
    c.params["limit"] = limit;
    rep.add(std::move(c));
  } else {  // h sweep
    std::vector<double> ns(rc.n_schedule.begin(), rc.n_schedule.end());
    CheckResult c = run_sweep("sweep_h_weak_residual", ns, [&](double nd) {
      Grid g = rc.make_grid(static_cast<int>(nd));
      ScalarField u = rc.make_field(g);
      ScanParams sp;
      sp.seed = rc.seed;
      const TestFunction psi = scan_trial(g, sp, 0);
      return std::fabs(weak_residual(u, psi, rc.p, nullptr, rc.grad_tol(g)));
    });
    // report against h rather than n
    for (auto& row : c.table) row.param = rc.make_grid(static_cast<int>(row.param)).h_max();
    c.params["order"] = fit_order(c.table);
    rep.add(std::move(c));
  }
  rep.checks.back().params["kind"] = rc.sweep_kind;
  return rep;
}

// Oracle vs fast timing table. Timings go to the CSV only; the JSON report
// stays deterministic.
inline VerificationReport run_bench_cmd(const RunConfig& rc, const Outputs& out) {
  VerificationReport rep;
  CheckResult c;
  c.name = "bench";
  c.params["qs"] = rc.bench_qs;
  c.params["eps"] = rc.bench_eps;
  c.params["argmins"] = rc.bench_argmins;

  std::string csv = "dim,n,q,eps,engine,millis,speedup_vs_oracle\n";
  auto time_ms = [](const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
  };
  char line[160];
  for (int dim : {1, 2}) {
    for (int n : dim == 1 ? rc.bench_sizes_1d : rc.bench_sizes_2d) {
      Grid g = dim == 1 ? Grid::line(0.0, 1.0, n) : Grid::box({0, 0}, {1, 1}, n, n);
      CounterRng rng(rc.seed, "field");
      std::vector<double> v(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) v[k] = rng.uniform(k);
      ScalarField u(g, std::move(v));
      for (double q : rc.bench_qs) {
        const EnvelopeParams prm{rc.bench_eps, q};
        const double t_oracle = time_ms([&] { (void)inf_convolve_oracle(u, prm); });
        const double t_vals = time_ms([&] { (void)inf_convolve_fast(u, prm, false); });
        double t_full = t_vals;
        if (rc.bench_argmins) t_full = time_ms([&] { (void)inf_convolve_fast(u, prm, true); });
        std::snprintf(line, sizeof(line), "%d,%d,%g,%g,oracle,%.3f,1.0\n", dim, n, q,
                      rc.bench_eps, t_oracle);
        csv += line;
        std::snprintf(line, sizeof(line), "%d,%d,%g,%g,fast_values,%.3f,%.1f\n", dim, n, q,
                      rc.bench_eps, t_vals, t_oracle / std::max(t_vals, 1e-6));
        csv += line;
        if (rc.bench_argmins) {
          std::snprintf(line, sizeof(line), "%d,%d,%g,%g,fast_with_argmins,%.3f,%.1f\n", dim, n,
                        q, rc.bench_eps, t_full, t_oracle / std::max(t_full, 1e-6));
          csv += line;
        }
      }
    }
  }
  if (out.enabled) {
    std::ofstream os(out.dir / "tables" / "bench.csv", std::ios::binary);
    os << csv;
  } else {
    std::fputs(csv.c_str(), stdout);
  }
  rep.add(std::move(c));
  return rep;
}

inline std::string gallery_list_text() {
  std::ostringstream os;
  for (const auto& e : gallery_entries()) {
    std::string dims = e.dims[0] && e.dims[1] ? "1,2" : (e.dims[0] ? "1" : "2");
    if (e.labels.empty()) {
      os << e.name << ' ' << dims << " - none -\n";
      continue;
    }
    for (const auto& l : e.labels) {
      os << e.name << ' ' << dims << ' ';
      os << (l.p_lo == 1.0 ? "(" : "[") << l.p_lo << ',';
      if (std::isinf(l.p_hi))
        os << "inf)";
      else
        os << l.p_hi << ']';
      os << ' ' << role_name(l.role) << ' ' << l.f_desc << '\n';
    }
  }
  return os.str();
}

// report.json payload for a finished run.
inline Json run_report_json(const std::string& command, const RunConfig& rc,
                            const VerificationReport& rep) {
  Json j = Json::object();
  j["config_version"] = rc.raw.at("config_version");
  j["command"] = command;
  j["params"] = rc.raw;
  Json body = report_to_json(rep, rc.dim);
  j["checks"] = body["checks"];
  j["pass"] = body["pass"];
  return j;
}

}  // namespace plaplab
