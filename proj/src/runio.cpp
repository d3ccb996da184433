#include "rwback/runio.hpp"

#include "rwback/certify.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

namespace rwback {
namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846264338327950288;

// Tolerance on emitted purity rows for runs with pure initial data. Much
// wider than any practical integration tolerance; a violation means the
// state left the physical cone, not that the integrator was sloppy.
constexpr double kPurityEmitTol = 1e-6;

// Hard cap on output rows so a typo in the cadence fails fast instead of
// filling the disk.
constexpr double kMaxOutputTimes = 100000.0;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Shortest decimal that round-trips the double, used for snapshot filenames
// so modes_0.1.csv is not spelled with seventeen digits.
std::string time_label(double t) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, t);
  return std::string(buf, res.ptr);
}

// A cadence lattice point t0 + n * cadence picks up a rounding each time it
// is formed, so 3 * 0.025 lands one ulp away from the double that prints as
// 0.075. Any representative within a few ulp is equally valid as an output
// time; prefer the one with the shortest decimal spelling so filenames and
// time columns stay readable.
double nice_time(double t) {
  if (t == 0.0) return t;
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, t);
    const double parsed = std::strtod(buf, nullptr);
    if (std::abs(parsed - t) <=
        4.0 * std::numeric_limits<double>::epsilon() * std::abs(t))
      return parsed;
  }
  return t;
}

[[noreturn]] void fail(const std::string& src, const std::string& msg) {
  throw ConfigError(src + ": " + msg);
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void check_keys(const std::string& src, const json& obj,
                const std::string& prefix,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        known = true;
        break;
      }
    if (!known) {
      std::string list;
      for (const char* a : allowed) {
        if (!list.empty()) list += ", ";
        list += a;
      }
      fail(src, "unknown key \"" + prefix + item.key() + "\" (allowed: " +
                    list + ")");
    }
  }
}

const json& object_section(const std::string& src, const json& root,
                           const char* key) {
  const json& v = root.at(key);
  if (!v.is_object()) fail(src, "\"" + std::string(key) + "\" must be an object");
  return v;
}

double num_field(const std::string& src, const json& obj,
                 const std::string& prefix, const char* key, double fallback,
                 bool* given = nullptr) {
  const json* v = find(obj, key);
  if (given) *given = v != nullptr;
  if (!v) return fallback;
  if (!v->is_number()) fail(src, "\"" + prefix + key + "\" must be a number");
  return v->get<double>();
}

int int_field(const std::string& src, const json& obj,
              const std::string& prefix, const char* key, int fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer())
    fail(src, "\"" + prefix + key + "\" must be an integer");
  return v->get<int>();
}

bool bool_field(const std::string& src, const json& obj,
                const std::string& prefix, const char* key, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean())
    fail(src, "\"" + prefix + key + "\" must be a boolean");
  return v->get<bool>();
}

std::string str_field(const std::string& src, const json& obj,
                      const std::string& prefix, const char* key,
                      const std::string& fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string())
    fail(src, "\"" + prefix + key + "\" must be a string");
  return v->get<std::string>();
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text,
                                const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
  if (!root.is_object()) fail(source, "top level must be a JSON object");
  check_keys(source, root, "",
             {"coupling", "grid", "init", "geometry", "integrator", "t_end",
              "cadence", "output_dir"});

  RunConfig rc;
  bool xi_given = false;
  bool cdp_given = false;

  if (root.contains("coupling")) {
    const json& c = object_section(source, root, "coupling");
    check_keys(source, c, "coupling.",
               {"m", "xi", "lambda", "c", "c_prime", "c_dprime", "G_N"});
    rc.coupling.m = num_field(source, c, "coupling.", "m", rc.coupling.m);
    if (!(rc.coupling.m >= 0.0))
      fail(source, "\"coupling.m\" must be nonnegative");
    rc.coupling.xi =
        num_field(source, c, "coupling.", "xi", rc.coupling.xi, &xi_given);
    if (const json* L = find(c, "lambda")) {
      if (L->is_string()) {
        if (L->get<std::string>() != "minkowski")
          fail(source,
               "\"coupling.lambda\" must be a positive number or the string "
               "\"minkowski\"");
        if (!(rc.coupling.m > 0.0))
          fail(source,
               "\"coupling.lambda\": \"minkowski\" selects the static-scale "
               "normalization and needs m > 0");
        rc.coupling.lambda = minkowski_lambda(rc.coupling.m);
      } else if (L->is_number()) {
        rc.coupling.lambda = L->get<double>();
        if (!(rc.coupling.lambda > 0.0))
          fail(source, "\"coupling.lambda\" must be positive");
      } else {
        fail(source,
             "\"coupling.lambda\" must be a positive number or the string "
             "\"minkowski\"");
      }
    }
    rc.coupling.c = num_field(source, c, "coupling.", "c", rc.coupling.c);
    rc.coupling.c_prime =
        num_field(source, c, "coupling.", "c_prime", rc.coupling.c_prime);
    rc.coupling.c_dprime = num_field(source, c, "coupling.", "c_dprime",
                                     rc.coupling.c_dprime, &cdp_given);
    rc.coupling.G_N = num_field(source, c, "coupling.", "G_N", rc.coupling.G_N);
  }

  if (root.contains("grid")) {
    const json& g = object_section(source, root, "grid");
    check_keys(source, g, "grid.", {"k_min", "k_max", "points"});
    rc.grid.k_min = num_field(source, g, "grid.", "k_min", rc.grid.k_min);
    rc.grid.k_max = num_field(source, g, "grid.", "k_max", rc.grid.k_max);
    rc.grid.points = int_field(source, g, "grid.", "points", rc.grid.points);
    if (!(rc.grid.k_min > 0.0) || !(rc.grid.k_max > rc.grid.k_min))
      fail(source, "\"grid\" needs 0 < k_min < k_max");
    if (rc.grid.points < 16)
      fail(source, "\"grid.points\" must be at least 16");
  }

  if (root.contains("init")) {
    const json& in = object_section(source, root, "init");
    check_keys(source, in, "init.",
               {"profile", "bump_amplitude", "mixed_amplitude", "Hdddot"});
    rc.profile = str_field(source, in, "init.", "profile", rc.profile);
    if (rc.profile != "hadamard" && rc.profile != "minkowski_vacuum" &&
        rc.profile != "hadamard_bump")
      fail(source,
           "\"init.profile\" must be one of hadamard, minkowski_vacuum, "
           "hadamard_bump");
    rc.profile_params.bump_amplitude = num_field(
        source, in, "init.", "bump_amplitude", rc.profile_params.bump_amplitude);
    rc.profile_params.mixed_amplitude =
        num_field(source, in, "init.", "mixed_amplitude",
                  rc.profile_params.mixed_amplitude);
    rc.Hdddot_init = num_field(source, in, "init.", "Hdddot", rc.Hdddot_init);
  }

  if (root.contains("geometry")) {
    const json& ge = object_section(source, root, "geometry");
    check_keys(source, ge, "geometry.", {"t", "a", "H", "Hdot", "Hddot"});
    rc.geometry.t = num_field(source, ge, "geometry.", "t", rc.geometry.t);
    rc.geometry.a = num_field(source, ge, "geometry.", "a", rc.geometry.a);
    if (!(rc.geometry.a > 0.0))
      fail(source, "\"geometry.a\" must be positive");
    rc.geometry.H = num_field(source, ge, "geometry.", "H", rc.geometry.H);
    rc.geometry.Hdot =
        num_field(source, ge, "geometry.", "Hdot", rc.geometry.Hdot);
    rc.geometry.Hddot =
        num_field(source, ge, "geometry.", "Hddot", rc.geometry.Hddot);
  }

  if (root.contains("integrator")) {
    const json& integ = object_section(source, root, "integrator");
    check_keys(source, integ, "integrator.",
               {"rel_tol", "abs_tol", "dt_init", "dt_min",
                "stability_fraction", "wald_constrained"});
    rc.integrator.rel_tol = num_field(source, integ, "integrator.", "rel_tol",
                                      rc.integrator.rel_tol);
    if (!(rc.integrator.rel_tol > 0.0))
      fail(source, "\"integrator.rel_tol\" must be positive");
    bool abs_given = false;
    rc.integrator.abs_tol = num_field(source, integ, "integrator.", "abs_tol",
                                      rc.integrator.abs_tol, &abs_given);
    if (abs_given && !(rc.integrator.abs_tol > 0.0))
      fail(source, "\"integrator.abs_tol\" must be positive when given");
    rc.integrator.dt_init = num_field(source, integ, "integrator.", "dt_init",
                                      rc.integrator.dt_init);
    if (!(rc.integrator.dt_init > 0.0))
      fail(source, "\"integrator.dt_init\" must be positive");
    rc.integrator.dt_min = num_field(source, integ, "integrator.", "dt_min",
                                     rc.integrator.dt_min);
    if (!(rc.integrator.dt_min > 0.0))
      fail(source, "\"integrator.dt_min\" must be positive");
    rc.integrator.stability_fraction =
        num_field(source, integ, "integrator.", "stability_fraction",
                  rc.integrator.stability_fraction);
    if (!(rc.integrator.stability_fraction >= 0.0))
      fail(source, "\"integrator.stability_fraction\" must be nonnegative");
    rc.integrator.wald_constrained =
        bool_field(source, integ, "integrator.", "wald_constrained",
                   rc.integrator.wald_constrained);
  }

  const json* te = find(root, "t_end");
  if (!te) fail(source, "missing required key \"t_end\"");
  if (!te->is_number()) fail(source, "\"t_end\" must be a number");
  rc.t_end = te->get<double>();
  const json* ca = find(root, "cadence");
  if (!ca) fail(source, "missing required key \"cadence\"");
  if (!ca->is_number()) fail(source, "\"cadence\" must be a number");
  rc.cadence = ca->get<double>();
  rc.output_dir = str_field(source, root, "", "output_dir", rc.output_dir);

  if (!(rc.t_end > 0.0)) fail(source, "\"t_end\" must be positive");
  if (!(rc.t_end > rc.geometry.t))
    fail(source, "\"t_end\" must be greater than the start time \"geometry.t\"");
  if (!(rc.cadence > 0.0)) fail(source, "\"cadence\" must be positive");
  if ((rc.t_end - rc.geometry.t) / rc.cadence > kMaxOutputTimes)
    fail(source, "\"cadence\" would produce more than 100000 output times");

  // The constrained second-order mode fixes two couplings. Fill them in when
  // the file leaves them open; reject explicit values that contradict them.
  if (rc.integrator.wald_constrained) {
    const double w = -1.0 / (2880.0 * kPi * kPi);
    if (!xi_given) {
      rc.coupling.xi = 1.0 / 6.0;
    } else if (rc.coupling.xi != 1.0 / 6.0) {
      fail(source,
           "\"integrator.wald_constrained\" requires coupling.xi = 1/6 = " +
               fmt(1.0 / 6.0) + " exactly, got " + fmt(rc.coupling.xi) +
               " (omit the key to use it)");
    }
    if (!cdp_given) {
      rc.coupling.c_dprime = w;
    } else if (std::abs(rc.coupling.c_dprime - w) > 1e-12 * std::abs(w)) {
      fail(source,
           "\"integrator.wald_constrained\" requires coupling.c_dprime = "
           "-1/(2880 pi^2) = " +
               fmt(w) + ", got " + fmt(rc.coupling.c_dprime) +
               " (omit the key to use it)");
    }
  }

  return rc;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_run_config_text(text, path);
}

void run_simulation(const RunConfig& config) {
  namespace fs = std::filesystem;

  SystemState st;
  try {
    const InitSpec spec = make_init_profile(
        config.profile, config.profile_params, config.geometry, config.coupling);
    st = init_state(spec, config.grid, config.geometry, config.coupling,
                    config.integrator, config.Hdddot_init);
    // Bring the solved geometry entries in line with the trace relation so
    // the first emitted row reflects the dynamics, not the raw file.
    if (st.integrator.wald_constrained) {
      st.geo.Hdot = wald_solve_Hdot(st);
    } else if (st.coupling.xi == 1.0 / 6.0) {
      st.Hdddot = conformal_geometry_rhs(st).Hdddot;
    } else {
      st.Hdddot = general_geometry_solve(st, st.Hdddot).Hdddot;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("initialization failed: " + std::string(e.what()));
  }

  // Output lattice: the start time, every cadence interval, and t_end. A
  // lattice point within the snap window of t_end merges into it.
  const double t0 = st.geo.t;
  const double snap = std::max(64.0 * std::numeric_limits<double>::epsilon(),
                               2.0 * st.integrator.dt_min) *
                      std::max(1.0, std::abs(config.t_end));
  std::vector<double> times{t0};
  for (double n = 1.0; ; n += 1.0) {
    const double tn = nice_time(t0 + n * config.cadence);
    if (tn > config.t_end - snap) break;
    times.push_back(tn);
  }
  times.push_back(config.t_end);

  const fs::path dir(config.output_dir);
  try {
    if (!dir.empty()) fs::create_directories(dir);
  } catch (const std::exception& e) {
    throw ConfigError("cannot create output directory " + dir.string() + ": " +
                      e.what());
  }
  std::ofstream geo_csv(dir / "geometry.csv");
  std::ofstream diag_csv(dir / "diagnostics.csv");
  if (!geo_csv || !diag_csv)
    throw ConfigError("cannot open output files in " + dir.string());
  geo_csv << "t,a,H,Hdot,Hddot,Hdddot,R,residual\n";
  diag_csv << "t,phi2_ren,max_J_defect,max_weighted_hadamard,tail_bound\n";

  const auto emit = [&](const SystemState& s) {
    for (double v : {s.geo.t, s.geo.a, s.geo.H, s.geo.Hdot, s.geo.Hddot,
                     s.Hdddot})
      if (!std::isfinite(v))
        throw SolverAbort("non-finite geometry at output time t = " +
                          fmt(s.geo.t));
    const TraceDiagnostics td = trace_diagnostics(s);
    geo_csv << fmt(s.geo.t) << ',' << fmt(s.geo.a) << ',' << fmt(s.geo.H)
            << ',' << fmt(s.geo.Hdot) << ',' << fmt(s.geo.Hddot) << ','
            << fmt(s.Hdddot) << ',' << fmt(ricci_scalar(s.geo)) << ','
            << fmt(td.residual) << '\n';
    const SourceDiagnostics sd = source_diagnostics(s);
    diag_csv << fmt(s.geo.t) << ',' << fmt(sd.phi2_ren) << ','
             << fmt(sd.max_J_defect) << ',' << fmt(sd.max_weighted_hadamard)
             << ',' << fmt(sd.tail_bound) << '\n';
    const fs::path mpath = dir / ("modes_" + time_label(s.geo.t) + ".csv");
    std::ofstream modes_csv(mpath);
    if (!modes_csv) throw ConfigError("cannot open " + mpath.string());
    modes_csv << "k,Gpp,Gppi,Gpipi,Jk\n";
    for (const ModeState& mode : s.modes) {
      const double J = mode_invariant(mode);
      if (!(mode.Gpp > 0.0))
        throw SolverAbort("row invariant violated at t = " + fmt(s.geo.t) +
                          ": G_phiphi = " + fmt(mode.Gpp) + " at k = " +
                          fmt(mode.k));
      if (s.pure_init && !(J >= 0.25 - kPurityEmitTol))
        throw SolverAbort("row invariant violated at t = " + fmt(s.geo.t) +
                          ": J_k = " + fmt(J) + " at k = " + fmt(mode.k) +
                          " fell below 1/4 on a pure run");
      modes_csv << fmt(mode.k) << ',' << fmt(mode.Gpp) << ',' << fmt(mode.Gppi)
                << ',' << fmt(mode.Gpipi) << ',' << fmt(J) << '\n';
    }
  };

  // Advance to an output time. A step whose size was reduced only to land on
  // the output point should not poison the controller's suggestion for the
  // next segment, so the pre-clip suggestion is carried across the landing.
  double carry_hint = 0.0;
  const auto advance_to = [&](double t_next) {
    while (st.geo.t < t_next - snap) {
      const double gap = t_next - st.geo.t;
      const bool clipped = st.dt_hint > 0.0 && st.dt_hint >= gap;
      if (clipped && carry_hint < st.dt_hint) carry_hint = st.dt_hint;
      step(st, gap);
      if (!clipped) carry_hint = 0.0;
    }
    st.geo.t = t_next;
    if (carry_hint > st.dt_hint) st.dt_hint = carry_hint;
  };

  emit(st);
  for (std::size_t i = 1; i < times.size(); ++i) {
    advance_to(times[i]);
    emit(st);
  }
}

int cmd_verify(const std::string& scope) {
  struct Suite {
    const char* name;
    CertificationReport (*fn)();
  };
  std::vector<Suite> suites;
  const bool all = scope == "all";
  if (all || scope == "series") suites.push_back({"series", &certify_series});
  if (all || scope == "hadamard")
    suites.push_back({"hadamard", &certify_expansions});
  if (all || scope == "subtraction")
    suites.push_back({"subtraction", &certify_subtraction});
  if (all || scope == "quadrature")
    suites.push_back({"quadrature", &certify_quadrature});
  if (suites.empty()) {
    std::cerr << "unknown verify scope \"" << scope
              << "\" (series, hadamard, subtraction, quadrature, all)\n";
    return 1;
  }

  int checks = 0;
  int failures = 0;
  for (const Suite& s : suites) {
    const CertificationReport rep = s.fn();
    std::cout << "== " << s.name << " ==\n" << rep.str();
    for (const CheckResult& c : rep.checks) {
      if (c.info_only) continue;
      ++checks;
      if (!c.pass) ++failures;
    }
  }
  if (failures) {
    std::cout << "verify: FAIL (" << failures << " of " << checks
              << " checks failed)\n";
    return 1;
  }
  std::cout << "verify: PASS (" << checks << " checks)\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_override) {
  try {
    RunConfig rc = parse_run_config(config_path);
    if (!out_override.empty()) rc.output_dir = out_override;
    run_simulation(rc);
    std::cout << "run complete: output in " << rc.output_dir << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SolverAbort& e) {
    std::cerr << "solver abort: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace rwback
