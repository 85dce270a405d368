#include "qns/harness_io.hpp"

#include "qns/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

namespace qns {

namespace fs = std::filesystem;

std::string to_string(SourceKind k) {
  switch (k) {
    case SourceKind::zero: return "zero";
    case SourceKind::shear_M: return "shear_M";
    case SourceKind::pulsed_f: return "pulsed_f";
    case SourceKind::shear_M_pulsed_f: return "shear_M_pulsed_f";
  }
  return "zero";
}

SourceKind source_kind_from_string(const std::string& s) {
  for (SourceKind k : {SourceKind::zero, SourceKind::shear_M, SourceKind::pulsed_f, SourceKind::shear_M_pulsed_f})
    if (to_string(k) == s) return k;
  throw ConfigError("sources: unknown kind '" + s + "'");
}

// ---------------------------------------------------------------- config

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

double parse_double(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(key + ": not a number: '" + raw + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(key + ": not an integer: '" + raw + "'");
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  return out;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

struct Key {
  const char* section;
  const char* name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <class Ref>
Key real_key(const char* sec, const char* name, Ref ref) {
  return {sec, name, [ref](const RunConfig& c) { return fmt(ref(const_cast<RunConfig&>(c))); },
          [ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_double(k, v); }};
}

template <class Ref>
Key int_key(const char* sec, const char* name, Ref ref) {
  return {sec, name, [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          [ref](RunConfig& c, const std::string& k, const std::string& v) {
            const long long x = parse_int(k, v);
            using T = std::remove_reference_t<decltype(ref(c))>;
            if (std::is_unsigned_v<T> && x < 0) throw ConfigError(k + ": must be nonnegative");
            ref(c) = T(x);
          }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      int_key("grid", "dim", [](RunConfig& c) -> int& { return c.grid.dim; }),
      int_key("grid", "n", [](RunConfig& c) -> int& { return c.grid.n; }),
      {"grid", "backend", [](const RunConfig& c) { return to_string(c.grid.backend); },
       [](RunConfig& c, const std::string&, const std::string& v) { c.grid.backend = backend_from_string(trim(v)); }},

      real_key("model", "gamma", [](RunConfig& c) -> double& { return c.model.gamma; }),
      real_key("model", "nu", [](RunConfig& c) -> double& { return c.model.nu; }),
      real_key("model", "kappa", [](RunConfig& c) -> double& { return c.model.kappa; }),
      real_key("model", "r0", [](RunConfig& c) -> double& { return c.model.r0; }),
      real_key("model", "r1", [](RunConfig& c) -> double& { return c.model.r1; }),
      real_key("model", "rho_floor", [](RunConfig& c) -> double& { return c.model.rho_floor; }),

      {"step", "scheme", [](const RunConfig& c) { return to_string(c.step.scheme); },
       [](RunConfig& c, const std::string&, const std::string& v) { c.step.scheme = scheme_from_string(trim(v)); }},
      real_key("step", "cfl", [](RunConfig& c) -> double& { return c.step.cfl; }),
      real_key("step", "t_end", [](RunConfig& c) -> double& { return c.step.t_end; }),
      int_key("step", "record_every", [](RunConfig& c) -> int& { return c.step.record_every; }),
      real_key("step", "fixed_dt", [](RunConfig& c) -> double& { return c.step.fixed_dt; }),

      {"initial", "name", [](const RunConfig& c) { return c.initial.name; },
       [](RunConfig& c, const std::string&, const std::string& v) { c.initial.name = trim(v); }},
      real_key("initial", "amplitude", [](RunConfig& c) -> double& { return c.initial.amplitude; }),
      int_key("initial", "wavenumber", [](RunConfig& c) -> int& { return c.initial.wavenumber; }),
      real_key("initial", "width", [](RunConfig& c) -> double& { return c.initial.width; }),
      real_key("initial", "velocity", [](RunConfig& c) -> double& { return c.initial.velocity; }),
      real_key("initial", "floor_margin", [](RunConfig& c) -> double& { return c.initial.floor_margin; }),
      int_key("initial", "seed", [](RunConfig& c) -> std::uint64_t& { return c.initial.seed; }),

      {"sources", "kind", [](const RunConfig& c) { return to_string(c.sources.kind); },
       [](RunConfig& c, const std::string&, const std::string& v) { c.sources.kind = source_kind_from_string(trim(v)); }},
      real_key("sources", "amplitude", [](RunConfig& c) -> double& { return c.sources.amplitude; }),
      int_key("sources", "wavenumber", [](RunConfig& c) -> int& { return c.sources.wavenumber; }),
      real_key("sources", "pulse_center", [](RunConfig& c) -> double& { return c.sources.pulse_center; }),
      real_key("sources", "pulse_width", [](RunConfig& c) -> double& { return c.sources.pulse_width; }),

      {"output", "dir", [](const RunConfig& c) { return c.output_dir; },
       [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = trim(v); }},

      {"sweep", "param", [](const RunConfig& c) { return to_string(c.sweep.param); },
       [](RunConfig& c, const std::string&, const std::string& v) { c.sweep.param = sweep_param_from_string(trim(v)); }},
      {"sweep", "values", [](const RunConfig& c) { return fmt_list(c.sweep.values); },
       [](RunConfig& c, const std::string& k, const std::string& v) { c.sweep.values = parse_list(k, v); }},

      int_key("commutator", "n", [](RunConfig& c) -> int& { return c.commutator.n; }),
      real_key("commutator", "p", [](RunConfig& c) -> double& { return c.commutator.p; }),
      real_key("commutator", "q", [](RunConfig& c) -> double& { return c.commutator.q; }),
      {"commutator", "epsilons", [](const RunConfig& c) { return fmt_list(c.commutator.epsilons); },
       [](RunConfig& c, const std::string& k, const std::string& v) { c.commutator.epsilons = parse_list(k, v); }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  if (grid.dim != 1 && grid.dim != 2) throw ConfigError("grid.dim must be 1 or 2");
  if (grid.n < 8 || (grid.n & (grid.n - 1)) != 0) throw ConfigError("grid.n must be a power of two >= 8");
  model.validate();
  step.validate();
  if (std::find(initial_names().begin(), initial_names().end(), initial.name) == initial_names().end())
    throw ConfigError("initial.name: unknown '" + initial.name + "'");
  if (!(initial.width > 0.0)) throw ConfigError("initial.width must be positive");
  if (!(initial.floor_margin >= 2.0)) throw ConfigError("initial.floor_margin must be >= 2");
  if (initial.wavenumber < 1) throw ConfigError("initial.wavenumber must be >= 1");
  if (!(sources.pulse_width > 0.0)) throw ConfigError("sources.pulse_width must be positive");
  if (sources.wavenumber < 1) throw ConfigError("sources.wavenumber must be >= 1");
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
  if (commutator.n < 8 || (commutator.n & (commutator.n - 1)) != 0)
    throw ConfigError("commutator.n must be a power of two >= 8");
  if (commutator.epsilons.empty()) throw ConfigError("commutator.epsilons must not be empty");
}

RunConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (std::none_of(keys().begin(), keys().end(), [&](const Key& k) { return section == k.section; }))
      throw ConfigError("config: unknown section or stray key '" + section + "'");
    for (const auto& [name, value] : body) {
      const auto it = std::find_if(keys().begin(), keys().end(),
                                   [&](const Key& k) { return section == k.section && name == k.name; });
      if (it == keys().end()) throw ConfigError("config: unknown key " + section + "." + name);
      it->set(cfg, section + "." + name, value.data());
    }
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  return parse_config(is);
}

void emit_config(std::ostream& os, const RunConfig& cfg) {
  std::string current;
  for (const Key& k : keys()) {
    if (current != k.section) {
      if (!current.empty()) os << '\n';
      current = k.section;
      os << '[' << current << "]\n";
    }
    os << k.name << " = " << k.get(cfg) << '\n';
  }
}

std::string config_text(const RunConfig& cfg) {
  std::ostringstream os;
  emit_config(os, cfg);
  return os.str();
}

// -------------------------------------------------------- initial data

const std::vector<std::string>& initial_names() {
  static const std::vector<std::string> names = {"uniform", "acoustic_pulse", "shear", "near_vacuum_bump",
                                                 "random_bandlimited"};
  return names;
}

namespace {

double periodic_gap(double a, double b) {
  const double d = std::abs(a - b);
  return std::min(d, 1.0 - d);
}

double bump(const TorusGrid& g, double x, double y, double width) {
  double r2 = periodic_gap(x, 0.5) * periodic_gap(x, 0.5);
  if (g.dim() == 2) r2 += periodic_gap(y, 0.5) * periodic_gap(y, 0.5);
  return std::exp(-r2 / (2.0 * width * width));
}

// Sum of cos(2 pi k.x + theta) over 1 <= |k|_inf <= K with uniform amplitudes, scaled to max |.| = 1.
Field bandlimited(const TorusGrid& g, int K, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> amp(-1.0, 1.0), phase(0.0, 2.0 * kPi);
  Field f = Field::scalar(g);
  const int ky_max = g.dim() == 2 ? K : 0;
  for (int kx = -K; kx <= K; ++kx)
    for (int ky = -ky_max; ky <= ky_max; ++ky) {
      if (kx == 0 && ky == 0) continue;
      const double a = amp(rng), th = phase(rng);
      for (std::size_t q = 0; q < g.size(); ++q) {
        const double arg = 2.0 * kPi * (kx * g.coord(q, 0) + (g.dim() == 2 ? ky * g.coord(q, 1) : 0.0)) + th;
        f(q) += a * std::cos(arg);
      }
    }
  const double m = f.max_abs();
  if (m > 0.0) f *= 1.0 / m;
  return f;
}

}  // namespace

FlowState make_initial(const TorusGrid& g, const InitialSpec& spec, const ModelParams& p) {
  const int d = g.dim();
  const double A = spec.amplitude, U = spec.velocity, w = spec.width;
  const int k = spec.wavenumber;
  Field rho = Field::scalar(g, 1.0);
  Field u = Field::vector(g);
  if (spec.name == "uniform") {
    for (std::size_t q = 0; q < g.size(); ++q) u(q, 0) = U;
  } else if (spec.name == "acoustic_pulse") {
    if (!(A > -1.0)) throw ConfigError("initial.amplitude must exceed -1 for acoustic_pulse");
    rho = Field::sample(g, [&](double x, double y) { return 1.0 + A * bump(g, x, y, w); });
    for (std::size_t q = 0; q < g.size(); ++q) u(q, 0) = U;
  } else if (spec.name == "shear") {
    const int axis = d == 2 ? 1 : 0;
    for (std::size_t q = 0; q < g.size(); ++q) u(q, 0) = U + A * std::sin(2.0 * kPi * k * g.coord(q, axis));
  } else if (spec.name == "near_vacuum_bump") {
    if (!(spec.floor_margin >= 2.0)) throw ConfigError("initial.floor_margin must be >= 2");
    const double low = spec.floor_margin * p.rho_floor;
    rho = Field::sample(g, [&](double x, double y) { return low + (1.0 - low) * (1.0 - bump(g, x, y, w)); });
    for (std::size_t q = 0; q < g.size(); ++q) rho(q) = std::max(rho(q), low);
    for (std::size_t q = 0; q < g.size(); ++q) u(q, 0) = U;
  } else if (spec.name == "random_bandlimited") {
    if (!(std::abs(A) < 1.0)) throw ConfigError("initial.amplitude must lie in (-1, 1) for random_bandlimited");
    std::mt19937_64 rng(spec.seed);
    rho = Field::scalar(g, 1.0) + A * bandlimited(g, k, rng);
    for (int i = 0; i < d; ++i) {
      const Field ui = bandlimited(g, k, rng);
      for (std::size_t q = 0; q < g.size(); ++q) u(q, i) = U * ui(q);
    }
  } else {
    throw ConfigError("initial.name: unknown '" + spec.name + "'");
  }
  FlowState s;
  s.mu = pointwise_map(rho, [](double r) { return std::sqrt(r); });
  s.m = pointwise_product(rho, u);
  check_floor(s.mu, p.rho_floor);
  DiffOps ops(g);
  const double er = e_r(ops, s, p);
  if (!std::isfinite(er)) throw InvariantViolation("initial_E_r_finite", "E_r = " + fmt(er));
  return s;
}

// ------------------------------------------------------------- sources

SourceTerms make_sources(const SourceSpec& spec, int dim) {
  SourceTerms src;
  const double A = spec.amplitude, tc = spec.pulse_center, tw = spec.pulse_width;
  const int k = spec.wavenumber;
  const bool M = spec.kind == SourceKind::shear_M || spec.kind == SourceKind::shear_M_pulsed_f;
  const bool f = spec.kind == SourceKind::pulsed_f || spec.kind == SourceKind::shear_M_pulsed_f;
  if (M) {
    src.M = [A, k, dim](const TorusGrid& g, double) {
      Field out = Field::matrix(g);
      for (std::size_t q = 0; q < g.size(); ++q) {
        const double s = A * std::sin(2.0 * kPi * k * g.coord(q, 0));
        if (dim == 1) {
          out(q, 0) = s;
        } else {
          out(q, 1) = s;
          out(q, 2) = s;
        }
      }
      return out;
    };
    src.symmetric_M = true;
  }
  if (f) {
    src.f = [A, k, tc, tw, dim](const TorusGrid& g, double t) {
      const double env = A * std::exp(-(t - tc) * (t - tc) / (2.0 * tw * tw));
      Field out = Field::vector(g);
      for (std::size_t q = 0; q < g.size(); ++q) {
        if (dim == 1) {
          out(q, 0) = env * std::sin(2.0 * kPi * k * g.coord(q, 0));
        } else {
          out(q, 0) = env * std::sin(2.0 * kPi * k * g.coord(q, 1));
          out(q, 1) = env * std::cos(2.0 * kPi * k * g.coord(q, 0));
        }
      }
      return out;
    };
  }
  return src;
}

// ------------------------------------------------------ output handling

fs::path resolve_output_dir(const RunConfig& cfg) {
  const char* env = std::getenv("QNS_OUTPUT_DIR");
  if (env != nullptr && *env != '\0') return fs::path(env);
  return fs::path(cfg.output_dir);
}

OutputLock::OutputLock(const fs::path& dir) : path_(dir / ".qns.lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw ConfigError("output directory " + dir.string() + " is locked by another process");
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

std::string state_file(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "state_%05zu.qnsf", k);
  return buf;
}

}  // namespace

void write_trajectory(const fs::path& dir, const RunConfig& cfg, const Trajectory& tr,
                      const std::vector<LedgerRow>& rows) {
  fs::create_directories(dir);
  nlohmann::json snaps = nlohmann::json::array();
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    const FlowState& s = tr.states[k];
    const std::vector<Field> fields = {s.mu, s.m};
    write_snapshot_file((dir / state_file(k)).string(), fields);
    snaps.push_back({{"t", s.t}, {"file", state_file(k)}});
  }
  const nlohmann::json manifest = {
      {"format", "qns-trajectory"},
      {"version", 1},
      {"config", config_text(cfg)},
      {"grid", {{"dim", cfg.grid.dim}, {"n", cfg.grid.n}, {"backend", to_string(cfg.grid.backend)}}},
      {"params",
       {{"gamma", tr.params.gamma},
        {"nu", tr.params.nu},
        {"kappa", tr.params.kappa},
        {"r0", tr.params.r0},
        {"r1", tr.params.r1},
        {"rho_floor", tr.params.rho_floor}}},
      {"dt_history", tr.dt_history},
      {"snapshots", snaps},
      {"ledger", "ledger.csv"},
  };
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  std::ofstream csv(dir / "ledger.csv");
  write_ledger_csv(csv, rows);
}

LoadedRun read_trajectory(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw ConfigError("trajectory: no manifest.json in " + dir.string());
  nlohmann::json m;
  try {
    is >> m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("trajectory: bad manifest: ") + e.what());
  }
  if (m.value("format", "") != "qns-trajectory") throw ConfigError("trajectory: unknown manifest format");
  LoadedRun out;
  std::istringstream cs(m.at("config").get<std::string>());
  out.config = parse_config(cs);
  Trajectory& tr = out.trajectory;
  tr.params = out.config.model;
  tr.sources = make_sources(out.config.sources, out.config.grid.dim);
  tr.dt_history = m.at("dt_history").get<std::vector<double>>();
  for (const auto& snap : m.at("snapshots")) {
    const auto fields = read_snapshot_file((dir / snap.at("file").get<std::string>()).string());
    if (fields.size() != 2) throw ConfigError("trajectory: snapshot must hold mu and m");
    FlowState s;
    s.t = snap.at("t").get<double>();
    s.mu = fields[0];
    s.m = fields[1];
    tr.states.push_back(std::move(s));
  }
  if (tr.states.empty()) throw ConfigError("trajectory: no snapshots");
  return out;
}

Simulation simulate(const RunConfig& cfg) {
  cfg.validate();
  const TorusGrid g(cfg.grid.dim, cfg.grid.n);
  DiffOps ops(g, cfg.grid.backend);
  const FlowState s0 = make_initial(g, cfg.initial, cfg.model);
  Simulation out;
  out.trajectory = evolve(ops, s0, cfg.model, make_sources(cfg.sources, cfg.grid.dim), cfg.step);
  out.ledger = ledger(ops, out.trajectory);
  return out;
}

// ------------------------------------------------------------ identities

std::vector<IdentityCheck> verify_identities(const RunConfig& cfg) {
  cfg.validate();
  const int n = std::max(cfg.grid.n, 64);
  const TorusGrid g(cfg.grid.dim, n);
  DiffOps ops(g, cfg.grid.backend);
  const double h = 1.0 / n;
  const double tol = cfg.grid.backend == Backend::spectral ? 1e-8 : 1e4 * std::pow(h, 4);
  std::vector<IdentityCheck> out;
  auto add = [&](const std::string& name, double residual, double t) {
    out.push_back({name, residual, t, std::isfinite(residual) && residual <= t});
  };

  const Field mu = Field::sample(g, [](double x, double y) {
    return std::sqrt(1.0 + 0.2 * std::sin(2 * kPi * x) * (1.0 + 0.1 * std::cos(2 * kPi * y)));
  });
  const Field bohm = bohm_force(ops, mu, 1.0, cfg.model.rho_floor);
  const Field qdiv = ops.div_mat(quantum_stress_div_form(ops, mu, 1.0, cfg.model.rho_floor));
  add("quantum_form_equivalence", (qdiv - bohm).max_abs() / bohm.max_abs(), tol);

  Field u = Field::vector(g);
  for (std::size_t q = 0; q < g.size(); ++q) {
    const double x = g.coord(q, 0), y = g.coord(q, 1);
    u(q, 0) = std::sin(2 * kPi * y) + 0.3 * std::cos(2 * kPi * x);
    if (g.dim() == 2) u(q, 1) = 0.5 * std::sin(2 * kPi * (x + y));
  }
  const Field vres = viscous_identity_residual(ops, mu, u, cfg.model);
  const Field vref = viscous_tensor(ops, mu, u, cfg.model).T_nu;
  add("viscous_defining_identity", vres.max_abs() / (std::sqrt(cfg.model.nu) * vref.max_abs()), tol);

  const double gam = cfg.model.gamma;
  const Field mg = pointwise_map(mu, [gam](double v) { return std::pow(v, gam); });
  const Field lhs = 2.0 * pointwise_product(mg, ops.grad(mg));
  const Field rhs = ops.grad(pointwise_map(mu, [gam](double v) { return std::pow(v * v, gam); }));
  add("pressure_form", (lhs - rhs).max_abs() / rhs.max_abs(), tol);

  double worst_break = 0.0, worst_bound = 0.0;
  for (double m : {1.0, 2.0, 10.0}) {
    const double ys[] = {0.0, 1.0 / (2 * m), 1.0 / m, m, 2 * m, 3 * m};
    const double want[] = {0.0, 0.0, 1.0, 1.0, 0.0, 0.0};
    for (int i = 0; i < 6; ++i) worst_break = std::max(worst_break, std::abs(phi_m(ys[i], m) - want[i]));
    for (int i = 0; i < 10000; ++i) {
      const double y = 3.0 * m * i / 9999.0;
      worst_bound = std::max(worst_bound, std::abs(y * phi_m_prime(y, m)));
    }
  }
  add("phi_m_breakpoints", worst_break, 0.0);
  add("phi_m_derivative_bound", worst_bound, 2.0);
  return out;
}

// -------------------------------------------------------------- recovery

std::vector<RenormFn> standard_renorm_scan(int dim) {
  std::vector<RenormFn> out;
  for (double a : {0.25, 0.5, 1.0, 2.0, 4.0}) out.push_back(atan_renorm(a, dim));
  for (double b : {0.5, 1.0}) out.push_back(gaussian_damped_renorm(b, dim));
  out.push_back(phi_n_family(1, 0, dim));
  return out;
}

DefectScan defect_scan(const DiffOps& ops, const Trajectory& tr, const std::vector<RenormFn>& scan) {
  if (scan.empty()) throw std::invalid_argument("defect_scan: empty scan");
  DefectScan out;
  out.M_r = M_r(ops, tr);
  double lo = kInf, hi = 0.0;
  for (const RenormFn& phi : scan) {
    const DefectMasses m = defect_masses(ops, tr, phi);
    DefectScanRow r{phi.name, phi.phi_second_sup, m.R_mass, m.Rbar_mass, 0.0};
    r.ratio = (m.R_mass + m.Rbar_mass) / (phi.phi_second_sup * out.M_r);
    if (!std::isfinite(r.ratio)) throw InvariantViolation("defect_bound_finite", phi.name + " ratio is not finite");
    out.C_bar = std::max(out.C_bar, r.ratio);
    lo = std::min(lo, phi.phi_second_sup);
    hi = std::max(hi, phi.phi_second_sup);
    out.rows.push_back(r);
  }
  out.curvature_span = hi / lo;
  return out;
}

std::vector<RecoveryRow> recovery_table(const DiffOps& ops, const Trajectory& tr, const TestFn& psi,
                                        const std::vector<int>& ns) {
  const int d = ops.grid().dim();
  const double momentum = weak_residual(ops, tr, psi).momentum.at(0);
  std::vector<RecoveryRow> out;
  for (int n : ns) {
    RenormFn phi = phi_n_family(n, 0, d);
    const DefectReport rep = renormalized_residual(ops, tr, phi, psi, 0.0, 0.0, kInf);
    out.push_back({n, std::abs(rep.lhs - momentum)});
  }
  return out;
}

// ------------------------------------------------------ commutator corpus

std::vector<CommutatorCase> commutator_corpus(const TorusGrid& g) {
  if (g.dim() != 1) throw std::invalid_argument("commutator_corpus: 1D grid required");
  const std::vector<std::pair<std::string, std::function<double(double)>>> gs = {
      {"sin", [](double x) { return std::sin(2 * kPi * x); }},
      {"mixed", [](double x) { return 0.5 * std::cos(4 * kPi * x) + 0.2 * std::sin(2 * kPi * x); }},
  };
  const std::vector<std::pair<std::string, std::function<double(double)>>> hs = {
      {"square", [](double x) { return std::tanh(40.0 * std::sin(6 * kPi * x)); }},
      {"sawtooth", [](double x) { return 3.0 * x - std::floor(3.0 * x) - 0.5; }},
      {"cusp", [](double x) { return std::sqrt(std::abs(std::sin(2 * kPi * x))); }},
      {"spikes",
       [](double x) {
         double v = 0.0;
         for (double c : {0.2, 0.45, 0.8}) {
           const double r = std::min(std::abs(x - c), 1.0 - std::abs(x - c));
           v += std::exp(-r * r / (2.0 * 0.01 * 0.01));
         }
         return v;
       }},
  };
  std::vector<CommutatorCase> out;
  for (const auto& [gn, gf] : gs)
    for (const auto& [hn, hf] : hs)
      out.push_back({gn + "/" + hn, Field::sample(g, [&](double x, double) { return gf(x); }),
                     Field::sample(g, [&](double x, double) { return hf(x); })});
  return out;
}

// --------------------------------------------------------------- failures

FailureRecord failure_from_current_exception() {
  FailureRecord f;
  try {
    throw;
  } catch (const InvariantViolation& e) {
    f = {ExitCode::invariant, "invariant_violation", e.invariant(), e.what()};
  } catch (const FloorViolation& e) {
    f = {ExitCode::numerical, "floor_violation", "rho >= rho_floor", e.what()};
  } catch (const NumericalAbort& e) {
    f = {ExitCode::numerical, "numerical_abort", "finite state", e.what()};
  } catch (const ConfigError& e) {
    f = {ExitCode::config, "config_error", "valid configuration", e.what()};
  } catch (const std::exception& e) {
    f = {ExitCode::config, "error", "", e.what()};
  }
  return f;
}

std::string failure_json(const FailureRecord& f) {
  const nlohmann::json j = {{"status", "failed"},
                            {"exit_code", int(f.code)},
                            {"kind", f.kind},
                            {"invariant", f.invariant},
                            {"detail", f.detail}};
  return j.dump();
}

}  // namespace qns
