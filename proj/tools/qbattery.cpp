// qbattery: command-line driver for the measure/communicate/rotate battery protocol.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qbattery/cli.hpp"

namespace {

using namespace qbattery::cli;

ModelKind parse_model_kind(const std::string& s) {
  if (s == "minimal") return ModelKind::minimal;
  if (s == "chain") return ModelKind::chain;
  if (s == "file") return ModelKind::file;
  throw qbattery::InvalidArgument("unknown model '" + s + "' (expected minimal, chain or file)");
}

struct Flags {
  std::string model = "minimal";
  ModelArgs model_args;
  SpecArgs spec;
  int site_a = -1;
  int site_b = -1;
  SampleArgs sample;
  PassivityArgs passivity;
  std::string mode = "exact";
  std::string format = "text";
  std::string out_path;
  std::vector<double> h_range{1.0, 2.0, 2.0};
  std::vector<double> k_range{1.0, 2.0, 2.0};
  unsigned threads = 0;
};

void add_model_flags(CLI::App* cmd, Flags& f, bool with_model_choice) {
  cmd->add_option("--h", f.model_args.h, "transverse field strength h");
  cmd->add_option("--k", f.model_args.k, "coupling strength k");
  cmd->add_option("--n-sites", f.model_args.n_sites, "number of chain sites");
  if (with_model_choice) {
    cmd->add_option("--model", f.model, "minimal | chain | file");
    cmd->add_option("--model-file", f.model_args.model_file, "operator file with piece blocks");
  }
}

void add_spec_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--site-a", f.site_a, "Alice's site");
  cmd->add_option("--site-b", f.site_b, "Bob's site");
  cmd->add_option("--sigma-a", f.spec.sigma_a, "Alice's measured Pauli (X, Y or Z)");
  cmd->add_option("--sigma-b", f.spec.sigma_b, "Bob's rotation generator (X, Y or Z)");
  cmd->add_option("--theta", f.spec.theta, "rotation angle in radians, or 'optimal'");
}

void finalize(Flags& f) {
  if (f.site_a >= 0) f.spec.site_a = f.site_a;
  if (f.site_b >= 0) f.spec.site_b = f.site_b;
  if (!f.model_args.model_file.empty() && f.model == "minimal") f.model = "file";
  f.model_args.kind = parse_model_kind(f.model);
}

Range to_range(const std::vector<double>& v, const std::string& name) {
  if (v.size() != 3) throw qbattery::InvalidArgument(name + " range takes start stop steps");
  return {v[0], v[1], static_cast<int>(v[2])};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum battery protocol simulator"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  Flags f;

  auto* minimal = app.add_subcommand("minimal", "two-qubit model with closed-form checks");
  minimal->add_option("--h", f.model_args.h, "transverse field strength h")->required();
  minimal->add_option("--k", f.model_args.k, "coupling strength k")->required();
  minimal->add_option("--theta", f.spec.theta, "rotation angle in radians, or 'optimal'");
  minimal->add_option("--format", f.format, "text | json");

  auto* chain = app.add_subcommand("chain", "transverse-field Ising chain");
  add_model_flags(chain, f, false);
  add_spec_flags(chain, f);
  chain->add_option("--mode", f.mode, "exact | sampled | passivity");
  chain->add_option("--shots", f.sample.shots, "Monte-Carlo shots (sampled mode)");
  chain->add_option("--seed", f.sample.seed, "random seed");
  chain->add_option("--estimator", f.sample.estimator, "conditional | readout | pauli");
  chain->add_option("--restarts", f.passivity.restarts, "ascent restarts (passivity mode)");
  chain->add_option("--format", f.format, "text | json");

  auto* sweep = app.add_subcommand("sweep", "parameter sweep to CSV or JSON");
  add_model_flags(sweep, f, true);
  add_spec_flags(sweep, f);
  sweep->add_option("--h-range", f.h_range, "start stop steps")->expected(3);
  sweep->add_option("--k-range", f.k_range, "start stop steps")->expected(3);
  sweep->add_option("--out", f.out_path, "output file (default: standard output)");
  sweep->add_option("--format", f.format, "csv | json");
  sweep->add_option("--threads", f.threads, "worker threads (0: all cores)");

  auto* passivity = app.add_subcommand("passivity", "certify local passivity of Bob's energy");
  add_model_flags(passivity, f, true);
  passivity->add_option("--site-b", f.site_b, "Bob's site");
  passivity->add_option("--restarts", f.passivity.restarts, "ascent restarts");
  passivity->add_option("--seed", f.passivity.seed, "random seed");
  passivity->add_flag("--grid", f.passivity.grid, "also run the pi/200 Euler-angle grid scan");
  passivity->add_option("--format", f.format, "text | json");

  auto* sample = app.add_subcommand("sample", "Monte-Carlo shot sampling");
  add_model_flags(sample, f, true);
  add_spec_flags(sample, f);
  sample->add_option("--shots", f.sample.shots, "number of shots");
  sample->add_option("--seed", f.sample.seed, "random seed");
  sample->add_option("--estimator", f.sample.estimator, "conditional | readout | pauli");
  sample->add_option("--format", f.format, "text | json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed() && f.format == "text") f.format = "csv";
    finalize(f);
    const auto format = parse_format(f.format);
    if (minimal->parsed()) {
      return cmd_minimal(f.model_args.h, f.model_args.k, f.spec.theta, format, std::cout, std::cerr);
    }
    if (chain->parsed()) {
      f.passivity.seed = f.sample.seed;
      return cmd_chain(f.model_args, f.spec, f.mode, f.sample, f.passivity, format, std::cout,
                       std::cerr);
    }
    if (sweep->parsed()) {
      SweepConfig cfg;
      cfg.model = f.model_args;
      cfg.spec = f.spec;
      cfg.h = to_range(f.h_range, "h");
      cfg.k = to_range(f.k_range, "k");
      cfg.out_path = f.out_path;
      cfg.format = format;
      cfg.threads = f.threads;
      return cmd_sweep(cfg, std::cout, std::cerr);
    }
    if (passivity->parsed()) {
      const std::optional<int> b = f.site_b >= 0 ? std::optional<int>(f.site_b) : std::nullopt;
      return cmd_passivity(f.model_args, b, f.passivity, format, std::cout, std::cerr);
    }
    if (sample->parsed()) {
      return cmd_sample(f.model_args, f.spec, f.sample, format, std::cout, std::cerr);
    }
  } catch (const qbattery::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
