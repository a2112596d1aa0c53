#include "scalarmix/experiment.hpp"

#include "scalarmix/operators.hpp"
#include "scalarmix/parallel.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace scalarmix {

namespace {

constexpr const char* kCodeVersion = "0.1.0";

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::vector<double> kDefaultLadder{0.2, 0.1, 0.05, 0.025, 0.0125};

const std::set<std::string> kTopLevelKeys{"experiment", "truncation", "flow",    "nu",        "dissipation_order",
                                          "noise",      "seed",       "initial", "parameters"};

/// Collects every problem instead of stopping at the first one.
class Checker {
 public:
  explicit Checker(std::vector<std::string>& errors) : errors_(errors) {}

  void fail(const std::string& field, const std::string& message) { errors_.push_back(field + ": " + message); }

  std::optional<double> number(const json& obj, const std::string& key, const std::string& field) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj.at(key).is_number()) {
      fail(field, "must be a number");
      return std::nullopt;
    }
    return obj.at(key).get<double>();
  }

  std::optional<long long> integer(const json& obj, const std::string& key, const std::string& field) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj.at(key).is_number_integer()) {
      fail(field, "must be an integer");
      return std::nullopt;
    }
    return obj.at(key).get<long long>();
  }

  std::optional<std::string> string(const json& obj, const std::string& key, const std::string& field) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj.at(key).is_string()) {
      fail(field, "must be a string");
      return std::nullopt;
    }
    return obj.at(key).get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const json& obj, const std::string& key, const std::string& field) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (v.is_number()) return std::vector<double>{v.get<double>()};
    if (!v.is_array() || v.empty()) {
      fail(field, "must be a number or a nonempty list of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) {
        fail(field, "must contain only numbers");
        return std::nullopt;
      }
      out.push_back(x.get<double>());
    }
    return out;
  }

  /// Records [k1, k2, "cos"|"sin", amplitude].
  std::optional<std::vector<FieldEntry>> records(const json& v, const std::string& field) {
    if (!v.is_array()) {
      fail(field, "must be a list of [k1, k2, \"cos\"|\"sin\", amplitude] records");
      return std::nullopt;
    }
    std::vector<FieldEntry> out;
    bool good = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const json& r = v[i];
      const std::string where = field + "[" + std::to_string(i) + "]";
      if (!r.is_array() || r.size() != 4 || !r[0].is_number_integer() || !r[1].is_number_integer() ||
          !r[2].is_string() || !r[3].is_number()) {
        fail(where, "must be [k1, k2, \"cos\"|\"sin\", amplitude]");
        good = false;
        continue;
      }
      try {
        out.push_back({{r[0].get<int>(), r[1].get<int>()}, parse_parity(r[2].get<std::string>()), r[3].get<double>()});
      } catch (const std::exception& e) {
        fail(where, e.what());
        good = false;
      }
    }
    if (!good) return std::nullopt;
    return out;
  }

 private:
  std::vector<std::string>& errors_;
};

json records_json(std::span<const FieldEntry> entries) {
  json out = json::array();
  for (const auto& e : entries)
    out.push_back({e.mode.k1, e.mode.k2, e.parity == Parity::Cos ? "cos" : "sin", e.amplitude});
  return out;
}

bool uses_dense_solves(ExperimentKind kind) {
  return kind == ExperimentKind::CovarianceLadder || kind == ExperimentKind::CellularSupport ||
         kind == ExperimentKind::Spectrum;
}

/// Parses into spec; every problem is appended to errors.
void parse_into(const json& config, ExperimentSpec& spec, std::vector<std::string>& errors,
                std::vector<std::string>& warnings) {
  Checker check(errors);
  if (!config.is_object()) {
    check.fail("config", "must be a JSON object");
    return;
  }
  for (const auto& [key, value] : config.items())
    if (!kTopLevelKeys.count(key)) warnings.push_back("unknown key '" + key + "' ignored");

  ordered_json& norm = spec.normalized;
  norm = ordered_json::object();

  const auto kind_name = check.string(config, "experiment", "experiment");
  std::optional<ExperimentKind> kind;
  if (!kind_name) {
    if (!config.contains("experiment")) check.fail("experiment", "missing");
  } else if (!(kind = parse_experiment_kind(*kind_name))) {
    check.fail("experiment",
               "unknown type '" + *kind_name +
                   "' (expected covariance-ladder, simulate, spectrum, growth, dissipation-probe, cellular-support)");
  }
  if (kind) spec.kind = *kind;
  norm["experiment"] = kind_name ? json(*kind_name) : json(nullptr);

  const auto n = check.integer(config, "truncation", "truncation");
  bool have_n = false;
  if (!n) {
    if (!config.contains("truncation")) check.fail("truncation", "missing (truncation order N)");
  } else if (*n < 1 || *n > 256) {
    check.fail("truncation", "must be in [1, 256]");
  } else {
    spec.truncation = static_cast<int>(*n);
    have_n = true;
  }
  norm["truncation"] = spec.truncation;

  // flow
  json flow_norm = json::object();
  if (!config.contains("flow")) {
    if (kind && *kind != ExperimentKind::CellularSupport) check.fail("flow", "missing");
    flow_norm = {{"kind", "cellular"}};
    spec.flow = default_cellular_flow();
  } else if (!config.at("flow").is_object()) {
    check.fail("flow", "must be an object with a 'kind'");
  } else {
    const json& f = config.at("flow");
    const auto fkind = check.string(f, "kind", "flow.kind");
    if (!fkind) {
      if (!f.contains("kind")) check.fail("flow.kind", "missing");
    } else if (*fkind == "shear") {
      if (!f.contains("modes")) {
        check.fail("flow.modes", "missing (shear profile records [0, j, \"cos\"|\"sin\", amplitude])");
      } else if (auto recs = check.records(f.at("modes"), "flow.modes")) {
        ShearProfile profile;
        bool good = true;
        for (std::size_t i = 0; i < recs->size(); ++i) {
          const auto& r = (*recs)[i];
          if (r.mode.k1 != 0 || r.mode.k2 == 0) {
            check.fail("flow.modes[" + std::to_string(i) + "]", "shear records need k1 = 0 and k2 != 0");
            good = false;
            continue;
          }
          const int j = std::abs(r.mode.k2);
          const double sign = (r.parity == Parity::Sin && r.mode.k2 < 0) ? -1.0 : 1.0;
          auto& coeffs = r.parity == Parity::Cos ? profile.cos_coeffs : profile.sin_coeffs;
          if (static_cast<int>(coeffs.size()) < j) coeffs.resize(static_cast<std::size_t>(j), 0.0);
          coeffs[static_cast<std::size_t>(j - 1)] += sign * r.amplitude;
        }
        if (good) {
          try {
            spec.flow = make_shear(profile);
          } catch (const std::exception& e) {
            check.fail("flow.modes", e.what());
          }
        }
        flow_norm = {{"kind", "shear"}, {"modes", records_json(*recs)}};
      }
    } else if (*fkind == "cellular" || *fkind == "custom") {
      const bool cellular = *fkind == "cellular";
      if (!f.contains("streamfunction")) {
        if (!cellular) check.fail("flow.streamfunction", "missing (custom flows need streamfunction records)");
        spec.flow = default_cellular_flow();
        const FieldEntry dflt[] = {{{1, -1}, Parity::Cos, 0.5}, {{1, 1}, Parity::Cos, -0.5}};
        flow_norm = {{"kind", *fkind}, {"streamfunction", records_json(dflt)}};
      } else if (auto recs = check.records(f.at("streamfunction"), "flow.streamfunction")) {
        int reach = 1;
        for (const auto& r : *recs) reach = std::max(reach, r.mode.sup_norm());
        try {
          const FourierField psi = make_trig_field(reach, *recs);
          spec.flow = cellular ? make_cellular(psi) : make_custom(psi);
        } catch (const std::exception& e) {
          check.fail("flow.streamfunction", e.what());
        }
        flow_norm = {{"kind", *fkind}, {"streamfunction", records_json(*recs)}};
      }
    } else {
      check.fail("flow.kind", "unknown kind '" + *fkind + "' (expected shear, cellular, custom)");
    }
  }
  norm["flow"] = flow_norm;
  if (have_n && spec.flow.max_wavenumber() > 2 * spec.truncation)
    check.fail("flow", "velocity wavenumber " + std::to_string(spec.flow.max_wavenumber()) +
                           " exceeds 2N = " + std::to_string(2 * spec.truncation));

  // viscosity
  const bool needs_ladder = kind && (*kind == ExperimentKind::CovarianceLadder ||
                                     *kind == ExperimentKind::DissipationProbe ||
                                     *kind == ExperimentKind::CellularSupport);
  const bool needs_nu = kind && *kind == ExperimentKind::Simulate;
  if (auto nu = check.numbers(config, "nu", "nu")) {
    spec.nu = *nu;
  } else if (needs_ladder && !config.contains("nu")) {
    spec.nu = kDefaultLadder;
  } else if (needs_nu && !config.contains("nu")) {
    check.fail("nu", "missing");
  }
  if (needs_nu && spec.nu.size() > 1) check.fail("nu", "simulate takes a single value");
  for (double nu : spec.nu) {
    if (!std::isfinite(nu) || nu < 0.0) {
      check.fail("nu", "values must be finite and nonnegative");
      break;
    }
    if (nu == 0.0 && kind && *kind == ExperimentKind::CovarianceLadder) {
      check.fail("nu", "nu = 0 has no stationary covariance (the inviscid generator is not stable)");
      break;
    }
    if (nu == 0.0 && needs_ladder) {
      check.fail("nu", "values must be positive for this experiment");
      break;
    }
  }
  if (kind && (*kind == ExperimentKind::Spectrum || *kind == ExperimentKind::Growth) && config.contains("nu"))
    warnings.push_back("nu is ignored by the inviscid " + to_string(*kind) + " experiment");
  if (!spec.nu.empty()) norm["nu"] = spec.nu;

  if (auto s = check.number(config, "dissipation_order", "dissipation_order")) {
    if (!(*s > 0.0)) check.fail("dissipation_order", "must be positive");
    spec.order = *s;
  }
  norm["dissipation_order"] = spec.order;

  // noise
  const bool needs_noise = kind && (*kind == ExperimentKind::CovarianceLadder || *kind == ExperimentKind::Simulate ||
                                    *kind == ExperimentKind::CellularSupport);
  if (config.contains("noise")) {
    if (auto recs = check.records(config.at("noise"), "noise")) {
      if (have_n) {
        try {
          spec.noise = make_noise(spec.truncation, *recs);
        } catch (const std::exception& e) {
          check.fail("noise", e.what());
        }
      }
      norm["noise"] = records_json(*recs);
    }
  } else if (needs_noise) {
    check.fail("noise", "missing (forcing records [k1, k2, \"cos\"|\"sin\", psi])");
  }
  if (spec.noise && needs_noise && spec.noise->intensity() == 0.0)
    warnings.push_back("noise has zero intensity; all covariances vanish");

  if (auto seed = check.integer(config, "seed", "seed")) {
    if (*seed < 0) check.fail("seed", "must be nonnegative");
    spec.seed = static_cast<std::uint64_t>(*seed);
  }
  norm["seed"] = spec.seed;

  if (config.contains("initial")) {
    if (auto recs = check.records(config.at("initial"), "initial")) {
      if (have_n) {
        try {
          spec.initial = make_field(spec.truncation, *recs);
        } catch (const std::exception& e) {
          check.fail("initial", e.what());
        }
      }
      norm["initial"] = records_json(*recs);
    }
  }

  // experiment-specific parameters
  const json empty = json::object();
  const json* params = &empty;
  if (config.contains("parameters")) {
    if (!config.at("parameters").is_object())
      check.fail("parameters", "must be an object");
    else
      params = &config.at("parameters");
  }
  const json& p = *params;
  ordered_json pn = ordered_json::object();
  std::set<std::string> known;
  auto take_number = [&](const char* key, double& target) {
    known.insert(key);
    if (auto v = check.number(p, key, std::string("parameters.") + key)) target = *v;
    pn[key] = target;
  };
  auto take_integer = [&](const char* key, auto& target) {
    known.insert(key);
    if (auto v = check.integer(p, key, std::string("parameters.") + key))
      target = static_cast<std::remove_reference_t<decltype(target)>>(*v);
    pn[key] = target;
  };

  if (kind) switch (*kind) {
      case ExperimentKind::Simulate: {
        known.insert("scheme");
        if (auto s = check.string(p, "scheme", "parameters.scheme")) {
          try {
            spec.scheme = parse_scheme(*s);
          } catch (const std::exception& e) {
            check.fail("parameters.scheme", "unknown scheme '" + *s + "' (expected exact-gaussian, semi-implicit-em)");
          }
        }
        pn["scheme"] = to_string(spec.scheme);
        take_number("dt", spec.dt);
        take_number("horizon", spec.horizon);
        known.insert("burn_in");
        if (auto b = check.number(p, "burn_in", "parameters.burn_in")) {
          spec.burn_in = *b;
        } else if (!spec.nu.empty() && spec.nu[0] > 0.0) {
          spec.burn_in = default_burn_in(spec.nu[0]);
        } else if (!p.contains("burn_in")) {
          check.fail("parameters.burn_in", "required when nu = 0 (the default is 5/nu)");
        }
        if (spec.burn_in) pn["burn_in"] = *spec.burn_in;
        take_integer("members", spec.members);
        take_integer("sample_every", spec.sample_every);
        take_integer("record_every", spec.record_every);
        if (!(spec.dt > 0.0)) check.fail("parameters.dt", "must be positive");
        if (spec.burn_in && !(*spec.burn_in >= 0.0)) check.fail("parameters.burn_in", "must be nonnegative");
        if (spec.burn_in && !(spec.horizon > *spec.burn_in))
          check.fail("parameters.horizon", "must exceed burn_in");
        if (spec.dt > 0.0) {
          const double ratio = spec.horizon / spec.dt;
          if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
            check.fail("parameters.horizon", "must be an integer multiple of dt");
        }
        if (spec.members < 1) check.fail("parameters.members", "must be at least 1");
        if (spec.sample_every < 1) check.fail("parameters.sample_every", "must be at least 1");
        if (spec.record_every < 1) check.fail("parameters.record_every", "must be at least 1");
        break;
      }
      case ExperimentKind::Growth: {
        known.insert("times");
        if (auto t = check.numbers(p, "times", "parameters.times")) {
          spec.times = *t;
        } else if (!p.contains("times")) {
          check.fail("parameters.times", "missing (list of horizons T)");
        }
        for (double t : spec.times)
          if (!(t > 0.0)) {
            check.fail("parameters.times", "horizons must be positive");
            break;
          }
        pn["times"] = spec.times;
        known.insert("method");
        if (auto m = check.string(p, "method", "parameters.method")) {
          if (*m == "shear-exact")
            spec.method = GrowthMethod::ShearExact;
          else if (*m == "truncated-exponential")
            spec.method = GrowthMethod::TruncatedExponential;
          else
            check.fail("parameters.method", "unknown method '" + *m + "' (expected truncated-exponential, shear-exact)");
        }
        pn["method"] = to_string(spec.method);
        if (spec.method == GrowthMethod::ShearExact && spec.flow.kind() != FlowKind::Shear)
          check.fail("parameters.method", "shear-exact needs a shear flow");
        take_number("max_step", spec.max_step);
        if (spec.max_step < 0.0) check.fail("parameters.max_step", "must be nonnegative (0 means T/1000)");
        known.insert("low_mode_horizons");
        if (auto t = check.numbers(p, "low_mode_horizons", "parameters.low_mode_horizons")) spec.low_mode_horizons = *t;
        for (double t : spec.low_mode_horizons)
          if (!(t > 0.0)) {
            check.fail("parameters.low_mode_horizons", "horizons must be positive");
            break;
          }
        pn["low_mode_horizons"] = spec.low_mode_horizons;
        take_number("low_mode_wavenumber2", spec.low_mode_wavenumber2);
        take_integer("bins", spec.bins);
        take_integer("grid", spec.grid);
        break;
      }
      case ExperimentKind::DissipationProbe:
        take_number("tau", spec.tau);
        if (!(spec.tau > 0.0)) check.fail("parameters.tau", "must be positive");
        break;
      case ExperimentKind::CellularSupport:
        take_integer("bins", spec.bins);
        take_integer("grid", spec.grid);
        if (spec.flow.kind() == FlowKind::Shear)
          check.fail("flow.kind", "cellular-support needs a cellular or custom flow");
        break;
      case ExperimentKind::CovarianceLadder:
      case ExperimentKind::Spectrum:
        break;
    }
  if (kind && (*kind == ExperimentKind::CellularSupport || *kind == ExperimentKind::Growth)) {
    if (spec.bins < 2) check.fail("parameters.bins", "must be at least 2");
    if (have_n && spec.grid < 4 * spec.truncation) check.fail("parameters.grid", "must be at least 4N");
  }
  for (const auto& [key, value] : p.items())
    if (!known.count(key)) warnings.push_back("unknown parameter '" + key + "' ignored");
  norm["parameters"] = pn;
}

double flop_estimate(const ExperimentSpec& spec, Index dim) {
  const double d = static_cast<double>(dim);
  const double count = std::max<double>(1.0, static_cast<double>(spec.nu.size()));
  switch (spec.kind) {
    case ExperimentKind::CovarianceLadder:
    case ExperimentKind::CellularSupport:
      return 25.0 * d * d * d * count;
    case ExperimentKind::DissipationProbe:
      return 30.0 * d * d * d * count;
    case ExperimentKind::Spectrum:
      return 10.0 * d * d * d;
    case ExperimentKind::Growth: {
      double steps = 0.0;
      for (double t : spec.times) steps += 1000.0 + t;
      return 30.0 * d * d * d + steps * d * d;
    }
    case ExperimentKind::Simulate: {
      const double steps = spec.horizon / std::max(spec.dt, 1e-300);
      return 30.0 * d * d * d + static_cast<double>(spec.members) * steps * d * d;
    }
  }
  return 0.0;
}

std::string runtime_class(double flops) {
  if (flops < 5e10) return "seconds";
  if (flops < 3e12) return "minutes";
  if (flops < 3e13) return "tens of minutes";
  return "hours";
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  std::ofstream open(const std::string& name) {
    const fs::path path = root_ / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    files_.push_back(path);
    return out;
  }

  const fs::path& root() const { return root_; }
  std::vector<fs::path>& files() { return files_; }

 private:
  fs::path root_;
  std::vector<fs::path> files_;
};

std::string ladder_tag(std::size_t i) {
  std::ostringstream out;
  out << std::setw(2) << std::setfill('0') << i;
  return out.str();
}

void run_covariance_ladder(const ExperimentSpec& spec, OutputDir& dir, int threads, ordered_json& extra) {
  const NoiseSpec& noise = *spec.noise;
  std::vector<std::optional<CovarianceOperator>> results(spec.nu.size());
  parallel_for(spec.nu.size(), threads, [&](std::size_t i) {
    results[i] = lyapunov_covariance(generator(spec.flow, spec.nu[i], spec.truncation, spec.order), noise, kDenseCap);
  });
  const bool shear = spec.flow.kind() == FlowKind::Shear;
  std::optional<CovarianceOperator> q0;
  if (shear) q0 = shear_limit_covariance(noise);

  std::vector<double> offblock, distance;
  auto summary = dir.open("summary.csv");
  summary << "nu,h1_trace,offblock_norm,dist_to_Q0\n";
  for (std::size_t i = 0; i < spec.nu.size(); ++i) {
    const CovarianceOperator& q = *results[i];
    {
      auto out = dir.open("covariance_" + ladder_tag(i) + ".txt");
      write_covariance(out, q);
    }
    {
      auto out = dir.open("eigenvalues_" + ladder_tag(i) + ".csv");
      write_eigen_summary_csv(out, q);
    }
    offblock.push_back(block_operator_norm(q, select_k1_nonzero()));
    distance.push_back(q0 ? covariance_distance(q, *q0) : std::numeric_limits<double>::quiet_NaN());
    summary << format_double(spec.nu[i]) << ',' << format_double(h1_trace(q)) << ','
            << format_double(offblock.back()) << ',' << format_double(distance.back()) << '\n';
  }
  if (q0) {
    auto out = dir.open("covariance_limit.txt");
    write_covariance(out, *q0);
  }
  auto fit = dir.open("fit.csv");
  fit << "quantity,exponent,prefactor\n";
  const auto [p_off, c_off] = power_law_fit(spec.nu, offblock);
  fit << "offblock_norm," << format_double(p_off) << ',' << format_double(c_off) << '\n';
  if (shear) {
    const auto [p_d, c_d] = power_law_fit(spec.nu, distance);
    fit << "dist_to_Q0," << format_double(p_d) << ',' << format_double(c_d) << '\n';
  }
  ordered_json residuals = ordered_json::array();
  for (const auto& q : results) residuals.push_back(q->provenance().residual);
  extra["lyapunov_residuals"] = residuals;
  extra["expected_h1_trace"] = noise.intensity() / 2.0;
}

void run_simulate(const ExperimentSpec& spec, OutputDir& dir, int threads, ordered_json& extra) {
  SimConfig config{spec.flow, spec.nu[0], *spec.noise};
  config.scheme = spec.scheme;
  config.dt = spec.dt;
  config.horizon = spec.horizon;
  config.burn_in = *spec.burn_in;
  config.members = spec.members;
  config.seed = spec.seed;
  config.s = spec.order;
  config.record_every = spec.record_every;
  config.sample_every = spec.sample_every;
  config.threads = threads;
  const FourierField f0 = spec.initial.value_or(FourierField(spec.truncation));
  const TrajectoryStats stats = simulate(config, f0);

  {
    auto out = dir.open("stats.csv");
    write_stats_csv(out, stats);
  }
  const Index samples = stats.accumulator.count();
  if (samples >= 2) {
    auto out = dir.open("covariance.txt");
    write_covariance(out, empirical_covariance(stats));
    auto moments = dir.open("moments.csv");
    moments << "index,k1,k2,parity,mean,variance,skewness,excess_kurtosis\n";
    const Basis basis(spec.truncation);
    const Eigen::MatrixXd cov = stats.accumulator.covariance();
    const Eigen::VectorXd skew = stats.accumulator.skewness();
    const Eigen::VectorXd kurt = stats.accumulator.excess_kurtosis();
    for (Index i = 0; i < basis.dimension(); ++i)
      moments << i << ',' << basis.mode(i).k1 << ',' << basis.mode(i).k2 << ',' << parity_tag(basis.parity(i)) << ','
              << format_double(stats.accumulator.mean()[i]) << ',' << format_double(cov(i, i)) << ','
              << format_double(skew[i]) << ',' << format_double(kurt[i]) << '\n';
  }

  // first recorded time at or after burn-in
  std::size_t first = stats.times.size() - 1;
  for (std::size_t i = 0; i < stats.times.size(); ++i)
    if (stats.times[i] >= config.burn_in - 1e-9 * config.dt) {
      first = i;
      break;
    }
  const std::size_t last = stats.times.size() - 1;
  auto summary = dir.open("summary.csv");
  summary << "key,value\n";
  summary << "samples," << samples << '\n';
  summary << "members," << stats.members() << '\n';
  summary << "noise_intensity," << format_double(stats.noise_intensity) << '\n';
  if (first < last) {
    const auto balance = energy_balance_residual(stats, stats.times[first], stats.times[last]);
    summary << "energy_residual," << format_double(balance.residual) << '\n';
    summary << "energy_standard_error," << format_double(balance.standard_error) << '\n';
    const Eigen::VectorXd h1 = stats.mean_h1();
    double mean_h1 = 0.0;
    for (std::size_t i = first; i <= last; ++i) mean_h1 += h1[static_cast<Index>(i)];
    mean_h1 /= static_cast<double>(last - first + 1);
    summary << "stationary_mean_h1," << format_double(mean_h1) << '\n';
    summary << "expected_mean_h1," << format_double(stats.noise_intensity / 2.0) << '\n';
  }
  if (config.nu > 0.0) {
    const double threshold = 5.0 * stats.noise_intensity / config.nu;
    summary << "exceedance_threshold," << format_double(threshold) << '\n';
    summary << "exceedance_fraction," << format_double(exceedance_fraction(stats, threshold)) << '\n';
  }
  extra["rng"] = stats.rng_algorithm;
  extra["scheme"] = to_string(stats.scheme);
}

void run_spectrum(const ExperimentSpec& spec, OutputDir& dir, ordered_json& extra) {
  const SpectrumReport report = spectrum(advection_matrix(spec.flow, spec.truncation));
  {
    auto out = dir.open("spectrum.csv");
    write_spectrum_csv(out, report);
  }
  auto summary = dir.open("summary.csv");
  summary << "key,value\n";
  summary << "dimension," << report.frequencies.size() << '\n';
  summary << "kernel_dimension," << report.kernel_dimension << '\n';
  summary << "max_real_part," << format_double(report.max_real_part) << '\n';
  summary << "max_residual," << format_double(report.max_residual) << '\n';
  extra["kernel_dimension"] = report.kernel_dimension;
}

void run_growth(const ExperimentSpec& spec, OutputDir& dir, ordered_json& extra) {
  const FieldEntry unit{{1, 0}, Parity::Cos, 1.0};
  const FourierField f0 = spec.initial.value_or(make_field(spec.truncation, std::span<const FieldEntry>(&unit, 1)));
  const GrowthCurve curve = h1_growth_average(spec.flow, f0, spec.times, spec.method, spec.max_step);
  {
    auto out = dir.open("growth.csv");
    write_growth_csv(out, curve);
  }
  extra["quadrature_steps"] = curve.steps;
  extra["initial_h1_norm2"] = curve.initial_h1_norm2;
  if (!spec.low_mode_horizons.empty()) {
    LowModeOptions options;
    options.max_wavenumber2 = spec.low_mode_wavenumber2;
    options.bins = spec.bins;
    options.grid = spec.grid;
    auto out = dir.open("low_mode.csv");
    out << "T,value\n";
    for (double t : spec.low_mode_horizons)
      out << format_double(t) << ',' << format_double(low_mode_time_average(spec.flow, f0, t, options)) << '\n';
  }
}

void run_dissipation(const ExperimentSpec& spec, OutputDir& dir, int threads, ordered_json& extra) {
  std::vector<double> norms(spec.nu.size());
  parallel_for(spec.nu.size(), threads, [&](std::size_t i) {
    norms[i] = semigroup_norm(generator(spec.flow, spec.nu[i], spec.truncation, spec.order), spec.tau / spec.nu[i]);
  });
  auto out = dir.open("dissipation.csv");
  out << "nu,norm\n";
  for (std::size_t i = 0; i < norms.size(); ++i)
    out << format_double(spec.nu[i]) << ',' << format_double(norms[i]) << '\n';
  extra["heat_bound"] = std::exp(-spec.tau);
}

void run_cellular_support(const ExperimentSpec& spec, OutputDir& dir, int threads) {
  struct Row {
    double eigenvalue = 0.0;
    double deviation = 0.0;
  };
  std::vector<Row> rows(spec.nu.size());
  parallel_for(spec.nu.size(), threads, [&](std::size_t i) {
    const auto q = lyapunov_covariance(generator(spec.flow, spec.nu[i], spec.truncation, spec.order), *spec.noise,
                                       kDenseCap);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.matrix());
    const Index top = q.dimension() - 1;
    const FourierField v(spec.truncation, eig.eigenvectors().col(top));
    const auto pi = streamline_projection(spec.flow, v, spec.bins, spec.grid);
    rows[i] = {eig.eigenvalues()[top], (v.coefficients() - pi.field.coefficients()).norm() / v.l2_norm()};
  });
  auto out = dir.open("cellular_support.csv");
  out << "nu,dominant_eigenvalue,streamline_deviation\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    out << format_double(spec.nu[i]) << ',' << format_double(rows[i].eigenvalue) << ','
        << format_double(rows[i].deviation) << '\n';
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::CovarianceLadder:
      return "covariance-ladder";
    case ExperimentKind::Simulate:
      return "simulate";
    case ExperimentKind::Spectrum:
      return "spectrum";
    case ExperimentKind::Growth:
      return "growth";
    case ExperimentKind::DissipationProbe:
      return "dissipation-probe";
    case ExperimentKind::CellularSupport:
      return "cellular-support";
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(const std::string& name) {
  for (auto kind : {ExperimentKind::CovarianceLadder, ExperimentKind::Simulate, ExperimentKind::Spectrum,
                    ExperimentKind::Growth, ExperimentKind::DissipationProbe, ExperimentKind::CellularSupport})
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

namespace {
std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = "invalid config";
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}
}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

std::string ValidationReport::format() const {
  std::ostringstream out;
  out << (ok() ? "ok" : "invalid") << '\n';
  if (kind) out << "experiment: " << to_string(*kind) << '\n';
  if (dimension > 0) {
    out << "dimension: " << dimension << '\n';
    out << "memory estimate: " << std::fixed << std::setprecision(1) << memory_bytes / (1024.0 * 1024.0) << " MiB\n";
    out << "runtime class: " << runtime_class << '\n';
  }
  for (const auto& w : warnings) out << "warning: " << w << '\n';
  for (const auto& e : errors) out << "error: " << e << '\n';
  return out.str();
}

json load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config: cannot open " + path.string()});
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config: parse error: ") + e.what()});
  }
}

ValidationReport validate_config(const json& config) {
  ValidationReport report;
  ExperimentSpec spec;
  parse_into(config, spec, report.errors, report.warnings);
  if (config.is_object() && config.contains("experiment") && config.at("experiment").is_string())
    report.kind = parse_experiment_kind(config.at("experiment").get<std::string>());
  if (spec.truncation > 0) {
    report.dimension = basis_dimension(spec.truncation);
    const double d = static_cast<double>(report.dimension);
    report.memory_bytes = 8.0 * d * d * 8.0;
    if (report.kind) {
      spec.kind = *report.kind;
      report.runtime_class = runtime_class(flop_estimate(spec, report.dimension));
      if (uses_dense_solves(*report.kind) && report.dimension > kDenseCap)
        report.warnings.push_back("dimension " + std::to_string(report.dimension) + " exceeds the " +
                                  std::to_string(kDenseCap) +
                                  " dense cap; the run succeeds only if every coupling block stays below it");
    }
  }
  return report;
}

ExperimentSpec parse_spec(const json& config) {
  ExperimentSpec spec;
  std::vector<std::string> errors, warnings;
  parse_into(config, spec, errors, warnings);
  if (!errors.empty()) throw ConfigError(errors);
  return spec;
}

std::pair<double, double> power_law_fit(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    count += 1.0;
  }
  const double denom = count * sxx - sx * sx;
  if (count < 2.0 || denom == 0.0)
    return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double p = (count * sxy - sx * sy) / denom;
  return {p, std::exp((sy - p * sx) / count)};
}

RunResult run_experiment(const ExperimentSpec& spec, const fs::path& out, int threads) {
  const std::string started = utc_now();
  const auto clock = std::chrono::steady_clock::now();
  OutputDir dir(out);
  ordered_json extra = ordered_json::object();
  switch (spec.kind) {
    case ExperimentKind::CovarianceLadder:
      run_covariance_ladder(spec, dir, threads, extra);
      break;
    case ExperimentKind::Simulate:
      run_simulate(spec, dir, threads, extra);
      break;
    case ExperimentKind::Spectrum:
      run_spectrum(spec, dir, extra);
      break;
    case ExperimentKind::Growth:
      run_growth(spec, dir, extra);
      break;
    case ExperimentKind::DissipationProbe:
      run_dissipation(spec, dir, threads, extra);
      break;
    case ExperimentKind::CellularSupport:
      run_cellular_support(spec, dir, threads);
      break;
  }

  ordered_json manifest = ordered_json::object();
  manifest["tool"] = "scalarmix";
  manifest["version"] = kCodeVersion;
  manifest["experiment"] = to_string(spec.kind);
  manifest["dimension"] = basis_dimension(spec.truncation);
  manifest["flow"] = describe(spec.flow);
  manifest["config"] = spec.normalized;
  manifest["results"] = extra;
  ordered_json files = ordered_json::array();
  for (const auto& f : dir.files()) files.push_back(f.filename().string());
  manifest["files"] = files;
  {
    std::ofstream m(out / "manifest.json");
    m << manifest.dump(2) << '\n';
  }
  ordered_json info = ordered_json::object();
  info["started"] = started;
  info["finished"] = utc_now();
  info["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock).count();
  info["threads"] = threads;
  {
    std::ofstream m(out / "run_info.json");
    m << info.dump(2) << '\n';
  }
  RunResult result{dir.files()};
  result.files.push_back(out / "manifest.json");
  result.files.push_back(out / "run_info.json");
  return result;
}

}  // namespace scalarmix
