#pragma once

// Command implementations behind the qbattery executable. Each command writes its
// report to `out`, diagnostics to `err`, and returns the process exit status.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "qbattery/chain_model.hpp"
#include "qbattery/errors.hpp"
#include "qbattery/minimal_model.hpp"
#include "qbattery/passivity.hpp"
#include "qbattery/pauli_io.hpp"
#include "qbattery/protocol.hpp"
#include "qbattery/spectral.hpp"

namespace qbattery::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitPassivityFail = 3;

inline constexpr double kPassivityThreshold = 1e-7;
/// Margin for the "exceeds classical density" verdict, above floating-point noise.
inline constexpr double kVerdictMargin = 1e-10;

enum class OutputFormat { text, csv, json };

inline OutputFormat parse_format(const std::string& s) {
  if (s == "text") return OutputFormat::text;
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw InvalidArgument("unknown format '" + s + "' (expected text, csv or json)");
}

/// "optimal" or a decimal angle in radians.
inline std::optional<double> parse_theta(const std::string& s) {
  if (s == "optimal") return std::nullopt;
  const auto v = detail::parse_double(s);
  if (!v || !std::isfinite(*v)) throw InvalidArgument("theta must be 'optimal' or a number, got '" + s + "'");
  return *v;
}

inline Pauli parse_letter(const std::string& s) {
  if (s.size() != 1) throw InvalidArgument("Pauli letter expected, got '" + s + "'");
  const Pauli p = pauli_from_char(s.front());
  if (p == Pauli::I) throw InvalidArgument("identity is not a valid protocol operator");
  return p;
}

/// %.12g, the fixed precision of tabular output.
inline std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

enum class ModelKind { minimal, chain, file };

struct ModelArgs {
  ModelKind kind = ModelKind::minimal;
  double h = 1.0;
  double k = 1.0;
  int n_sites = 2;
  std::string model_file;
};

struct SpecArgs {
  std::optional<int> site_a;
  std::optional<int> site_b;
  std::string sigma_a = "X";
  std::string sigma_b = "Y";
  std::string theta = "optimal";
};

struct ResolvedModel {
  LocalDecomposition decomposition;
  std::string name;
  std::vector<double> piece_offsets;  // constants fixed by the chain builder
  int default_site_a = 0;
  int default_site_b = 1;
};

inline ResolvedModel resolve_model(const ModelArgs& args) {
  ResolvedModel m;
  switch (args.kind) {
    case ModelKind::minimal: {
      const auto p = minimal::MinimalParams::make(args.h, args.k);
      m.decomposition = minimal::build_minimal_hamiltonian(p);
      m.name = "minimal";
      break;
    }
    case ModelKind::chain: {
      if (!(args.h > 0.0) || !(args.k > 0.0)) throw InvalidArgument("chain requires h > 0 and k > 0");
      auto chain = chain::build_ising_chain(chain::ChainParams::uniform(args.n_sites, args.h, args.k));
      m.decomposition = std::move(chain.decomposition);
      m.piece_offsets = std::move(chain.piece_offsets);
      m.name = "chain";
      m.default_site_a = args.n_sites - 2;
      m.default_site_b = args.n_sites - 1;
      break;
    }
    case ModelKind::file: {
      std::ifstream in(args.model_file);
      if (!in) throw InvalidArgument("cannot read model file '" + args.model_file + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      m.decomposition = parse_decomposition(buf.str());
      m.name = "file:" + args.model_file;
      break;
    }
  }
  return m;
}

inline ProtocolSpec resolve_spec(const ResolvedModel& m, const SpecArgs& s) {
  const int a = s.site_a.value_or(m.default_site_a);
  const int b = s.site_b.value_or(m.default_site_b);
  return ProtocolSpec::make(m.decomposition.num_sites(), a, parse_letter(s.sigma_a), b,
                            parse_letter(s.sigma_b), parse_theta(s.theta));
}

inline Json report_json(const ResolvedModel& m, const ProtocolSpec& spec,
                                  const ProtocolReport& r, double e_c) {
  Json j;
  j["model"] = m.name;
  j["num_sites"] = m.decomposition.num_sites();
  j["site_a"] = spec.site_a;
  j["site_b"] = spec.site_b;
  j["sigma_a"] = spec.sigma_a.label();
  j["sigma_b"] = spec.sigma_b.label();
  j["xi"] = r.xi_eta.xi;
  j["eta"] = r.xi_eta.eta;
  j["theta"] = r.theta_used;
  j["theta_optimal"] = r.theta_optimal;
  j["p_minus"] = r.branch_probability(-1);
  j["p_plus"] = r.branch_probability(1);
  j["bob_energy_minus"] = r.branch(-1).bob_energy;
  j["bob_energy_plus"] = r.branch(1).bob_energy;
  j["e_b_initial"] = r.e_b_initial;
  j["e_b_simulated"] = r.e_b_simulated;
  j["e_b_gain"] = r.e_b_gain();
  j["e_b_predicted"] = r.e_b_predicted;
  j["e_b_predicted_absolute"] = r.e_b_predicted_absolute();
  j["e_c"] = e_c;
  j["exceeds_classical_density"] = r.e_b_simulated > e_c + kVerdictMargin;
  j["alice_energy_change"] = r.alice_energy_change;
  j["reference_energy"] = r.reference_energy;
  j["offset_shift"] = r.offset_shift;
  j["gap_top"] = r.conditions.gap;
  j["entropy_cut"] = r.conditions.entropy;
  j["cut_site"] = r.conditions.cut_site;
  j["conditions"] = {
      {"measurement_commutes_with_bob", r.conditions.measurement_commutes_with_bob},
      {"bob_local_dynamics", r.conditions.bob_local_dynamics},
      {"unique_reference", r.conditions.unique_reference},
      {"entangled", r.conditions.entangled},
  };
  if (!m.piece_offsets.empty()) j["piece_offsets"] = m.piece_offsets;
  return j;
}

/// One "key: value" line per scalar; nested objects are flattened with dots.
inline void print_text(std::ostream& out, const Json& j, const std::string& prefix = "") {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const auto& v = it.value();
    if (v.is_object()) {
      print_text(out, v, key);
    } else if (v.is_number_float()) {
      out << key << ": " << fmt12(v.get<double>()) << '\n';
    } else if (v.is_array()) {
      out << key << ":";
      for (const auto& e : v) out << ' ' << (e.is_number_float() ? fmt12(e.get<double>()) : e.dump());
      out << '\n';
    } else if (v.is_string()) {
      out << key << ": " << v.get<std::string>() << '\n';
    } else {
      out << key << ": " << v.dump() << '\n';
    }
  }
}

inline void emit(std::ostream& out, const Json& j, OutputFormat format) {
  if (format == OutputFormat::json) {
    out << j.dump(2) << '\n';
  } else {
    print_text(out, j);
  }
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

inline int cmd_minimal(double h, double k, const std::string& theta, OutputFormat format,
                       std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto params = minimal::MinimalParams::make(h, k);
    ResolvedModel m;
    m.decomposition = minimal::build_minimal_hamiltonian(params);
    m.name = "minimal";
    const auto spec = minimal::default_spec(parse_theta(theta));
    const auto report = run_protocol_exact(m.decomposition, spec, ExactOptions{false});
    const double e_c = classical_density_bound(m.decomposition);
    auto j = report_json(m, spec, report, e_c);
    j["h"] = h;
    j["k"] = k;
    j["e_b_closed_form"] = minimal::charged_energy_closed_form(params, report.theta_used);
    emit(out, j, format);
    return kExitOk;
  });
}

enum class ChainMode { exact, sampled, passivity };

inline ChainMode parse_chain_mode(const std::string& s) {
  if (s == "exact") return ChainMode::exact;
  if (s == "sampled") return ChainMode::sampled;
  if (s == "passivity") return ChainMode::passivity;
  throw InvalidArgument("unknown mode '" + s + "' (expected exact, sampled or passivity)");
}

inline SampleEstimator parse_estimator(const std::string& s) {
  if (s == "conditional") return SampleEstimator::conditional_expectation;
  if (s == "readout") return SampleEstimator::energy_readout;
  if (s == "pauli") return SampleEstimator::pauli_readout;
  throw InvalidArgument("unknown estimator '" + s + "' (expected conditional, readout or pauli)");
}

struct SampleArgs {
  std::uint64_t shots = 100000;
  std::uint64_t seed = 1;
  std::string estimator = "conditional";
};

struct PassivityArgs {
  int restarts = 32;
  std::uint64_t seed = 1;
  bool grid = false;
  int grid_divisions = 200;
};

inline Json sample_json(const SampledReport& s) {
  return {
      {"shots", s.shots},
      {"seed", s.seed},
      {"estimator", to_string(s.estimator)},
      {"count_minus", s.outcome_counts[0]},
      {"count_plus", s.outcome_counts[1]},
      {"theta", s.theta_used},
      {"e_b_estimate", s.mean},
      {"std_error", s.std_error},
      {"e_b_exact", s.exact},
      {"deviation_in_std_errors",
       s.std_error > 0.0 ? std::abs(s.mean - s.exact) / s.std_error : 0.0},
  };
}

/// Runs the passivity search on the model's reference state; returns (json, passed).
inline std::pair<Json, bool> passivity_json(const LocalDecomposition& d, int site_b,
                                                      const PassivityArgs& args) {
  const auto spectrum = highest_energy_state(d.total());
  const auto found = local_passivity_search(d, spectrum.emax_state, site_b, args.restarts, args.seed);
  const bool pass = found.max_energy <= kPassivityThreshold;
  Json j{
      {"site_b", site_b},
      {"initial_energy", found.initial_energy},
      {"max_energy", found.max_energy},
      {"alpha", found.best.alpha},
      {"beta", found.best.beta},
      {"gamma", found.best.gamma},
      {"restarts", found.restarts},
      {"converged", found.converged},
      {"seed", args.seed},
      {"threshold", kPassivityThreshold},
  };
  if (args.grid) {
    const auto grid = passivity_grid_scan(d.piece(static_cast<std::size_t>(site_b)), spectrum.emax_state,
                                          site_b, args.grid_divisions);
    j["grid_max_energy"] = grid.max_energy;
    j["grid_evaluations"] = grid.evaluations;
  }
  j["verdict"] = pass ? "PASS" : "FAIL";
  return {j, pass};
}

inline int cmd_chain(const ModelArgs& model_args, const SpecArgs& spec_args, const std::string& mode,
                     const SampleArgs& sample_args, const PassivityArgs& passivity_args,
                     OutputFormat format, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (model_args.n_sites < 2 || model_args.n_sites > kMaxSites) {
      throw InvalidArgument("--n-sites must be in [2, " + std::to_string(kMaxSites) + "]");
    }
    ModelArgs args = model_args;
    args.kind = ModelKind::chain;
    const auto m = resolve_model(args);
    const auto spec = resolve_spec(m, spec_args);
    const auto chain_mode = parse_chain_mode(mode);
    const auto report = run_protocol_exact(m.decomposition, spec, ExactOptions{false});
    auto j = report_json(m, spec, report, classical_density_bound(m.decomposition));
    j["h"] = args.h;
    j["k"] = args.k;
    j["mode"] = mode;
    int status = kExitOk;
    if (chain_mode == ChainMode::sampled) {
      j["sampled"] = sample_json(run_protocol_sampled(m.decomposition, spec, sample_args.shots,
                                                      sample_args.seed,
                                                      parse_estimator(sample_args.estimator)));
    } else if (chain_mode == ChainMode::passivity) {
      auto [pj, pass] = passivity_json(m.decomposition, spec.site_b, passivity_args);
      j["passivity"] = pj;
      if (!pass) status = kExitPassivityFail;
    }
    emit(out, j, format);
    return status;
  });
}

inline int cmd_sample(const ModelArgs& model_args, const SpecArgs& spec_args,
                      const SampleArgs& sample_args, OutputFormat format, std::ostream& out,
                      std::ostream& err) {
  return guarded(err, [&] {
    const auto m = resolve_model(model_args);
    const auto spec = resolve_spec(m, spec_args);
    auto j = sample_json(run_protocol_sampled(m.decomposition, spec, sample_args.shots,
                                              sample_args.seed, parse_estimator(sample_args.estimator)));
    j["model"] = m.name;
    emit(out, j, format);
    return kExitOk;
  });
}

inline int cmd_passivity(const ModelArgs& model_args, std::optional<int> site_b,
                         const PassivityArgs& args, OutputFormat format, std::ostream& out,
                         std::ostream& err) {
  return guarded(err, [&] {
    const auto m = resolve_model(model_args);
    const int b = site_b.value_or(m.default_site_b);
    auto [j, pass] = passivity_json(m.decomposition, b, args);
    j["model"] = m.name;
    emit(out, j, format);
    return pass ? kExitOk : kExitPassivityFail;
  });
}

struct Range {
  double start = 1.0;
  double stop = 1.0;
  int steps = 2;

  std::vector<double> values() const {
    std::vector<double> v;
    for (int i = 0; i < steps; ++i) {
      v.push_back(i + 1 == steps ? stop : start + (stop - start) * i / (steps - 1));
    }
    return v;
  }

  void validate(const std::string& name) const {
    if (steps < 2) throw InvalidArgument(name + " range needs at least 2 steps");
    if (!std::isfinite(start) || !std::isfinite(stop)) throw InvalidArgument(name + " range is not finite");
    if (start == stop) throw InvalidArgument(name + " range is degenerate (start == stop)");
  }
};

struct SweepConfig {
  ModelArgs model;  // minimal or chain; h and k come from the ranges
  SpecArgs spec;
  Range h;
  Range k;
  std::string out_path;  // empty: write to `out`
  OutputFormat format = OutputFormat::csv;
  unsigned threads = 0;  // 0: hardware concurrency
};

inline const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{"h",           "k",      "xi",           "eta",
                                             "theta_opt",   "e_b_predicted", "e_b_simulated",
                                             "e_c",         "gap_top", "entropy_cut"};
  return cols;
}

struct SweepRow {
  std::array<double, 10> values{};
};

inline SweepRow sweep_point(const SweepConfig& cfg, double h, double k) {
  ModelArgs args = cfg.model;
  args.h = h;
  args.k = k;
  const auto m = resolve_model(args);
  auto spec_args = cfg.spec;
  spec_args.theta = "optimal";
  const auto spec = resolve_spec(m, spec_args);
  const auto r = run_protocol_exact(m.decomposition, spec, ExactOptions{false});
  return {{h, k, r.xi_eta.xi, r.xi_eta.eta, r.theta_used, r.e_b_predicted_absolute(), r.e_b_simulated,
           classical_density_bound(m.decomposition), r.conditions.gap, r.conditions.entropy}};
}

/// Evaluates the grid row-major (h outer, k inner); rows come back in grid order.
inline std::vector<SweepRow> run_sweep(const SweepConfig& cfg) {
  cfg.h.validate("h");
  cfg.k.validate("k");
  if (cfg.model.kind == ModelKind::file) throw InvalidArgument("sweeps need a minimal or chain model");
  const auto hs = cfg.h.values();
  const auto ks = cfg.k.values();
  const std::size_t total = hs.size() * ks.size();
  std::vector<SweepRow> rows(total);
  std::vector<std::exception_ptr> errors(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      try {
        rows[i] = sweep_point(cfg, hs[i / ks.size()], ks[i % ks.size()]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned n = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, total));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

inline void write_sweep(std::ostream& out, const std::vector<SweepRow>& rows, OutputFormat format) {
  const auto& cols = sweep_columns();
  if (format == OutputFormat::json) {
    Json arr = Json::array();
    for (const auto& row : rows) {
      Json obj = Json::object();
      for (std::size_t c = 0; c < cols.size(); ++c) obj[cols[c]] = row.values[c];
      arr.push_back(obj);
    }
    out << arr.dump(2) << '\n';
    return;
  }
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.values.size(); ++c) out << (c ? "," : "") << fmt12(row.values[c]);
    out << '\n';
  }
}

inline int cmd_sweep(const SweepConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.format == OutputFormat::text) throw InvalidArgument("sweep output must be csv or json");
    const auto rows = run_sweep(cfg);
    if (cfg.out_path.empty()) {
      write_sweep(out, rows, cfg.format);
      return kExitOk;
    }
    std::ofstream file(cfg.out_path, std::ios::binary);
    if (!file) throw Error("cannot open output file '" + cfg.out_path + "'");
    write_sweep(file, rows, cfg.format);
    file.flush();
    if (!file) throw Error("failed writing '" + cfg.out_path + "'");
    out << "wrote " << rows.size() << " rows to " << cfg.out_path << '\n';
    return kExitOk;
  });
}

}  // namespace qbattery::cli
