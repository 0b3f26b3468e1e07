#include "peakforge/cli/app.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "peakforge/cli/recommend.hpp"
#include "peakforge/cli/run.hpp"
#include "peakforge/cli/signal_io.hpp"
#include "peakforge/cli/synthetic.hpp"
#include "peakforge/error.hpp"

namespace peakforge::cli {

namespace {

struct FitFlags {
  std::string method;
  std::string input;
  std::string output_dir;
  std::optional<int> q;
  int degree = 3;
  std::optional<double> kappa;
  std::string lambda_policy = "reml";
  std::optional<double> threshold;
  std::string sigma2_policy;
  int components = 0;
  int max_components = 3;
  std::string wave;
  int shape_length = 151;
  int min_segment = 1;
  std::optional<int> max_outer;
  std::uint64_t seed = 1;
  int threads = 1;
  int min_rows = 10;
  std::vector<double> kappa_grid;
};

void add_fit_flags(CLI::App& app, FitFlags& f) {
  app.add_option("--method", f.method, "fitting method")
      ->required()
      ->check(CLI::IsMember(method_names()));
  app.add_option("--input", f.input, "x,y CSV file")->required();
  app.add_option("--output-dir", f.output_dir, "directory for fit.csv, summary.txt and plot data");
  app.add_option("--q", f.q, "number of inner knots");
  app.add_option("--degree", f.degree, "spline degree")->capture_default_str();
  app.add_option("--kappa", f.kappa, "L0 tuning parameter");
  app.add_option("--lambda-policy", f.lambda_policy, "reml or fixed:<value>")->capture_default_str();
  app.add_option("--threshold", f.threshold, "segmentation threshold (punireg)");
  app.add_option("--sigma2-policy", f.sigma2_policy,
                 "fixed:<v>, iterate:<init>:<abstol> or window:<lo>:<hi> (0-based, inclusive)");
  app.add_option("--components", f.components, "additive components; 0 selects by AIC")
      ->capture_default_str();
  app.add_option("--max-components", f.max_components, "largest L tried by AIC")->capture_default_str();
  app.add_option("--wave", f.wave, "known or initial wave U0:xi1:xi2");
  app.add_option("--shape-length", f.shape_length, "peak shape length in samples")->capture_default_str();
  app.add_option("--min-segment", f.min_segment, "shortest kept segment (punireg)")->capture_default_str();
  app.add_option("--max-outer", f.max_outer, "cap on outer iterations or backfitting cycles");
  app.add_option("--seed", f.seed, "seed recorded with the run")->capture_default_str();
  app.add_option("--threads", f.threads, "worker threads")->capture_default_str();
  app.add_option("--min-rows", f.min_rows, "smallest accepted input")->capture_default_str();
}

RunConfig to_config(const FitFlags& f) {
  RunConfig c;
  c.method = *parse_method(f.method);
  c.q = f.q;
  c.degree = f.degree;
  c.kappa = f.kappa;
  c.lambda = parse_lambda_policy(f.lambda_policy);
  c.threshold = f.threshold;
  if (!f.sigma2_policy.empty()) c.sigma2 = parse_sigma2_policy(f.sigma2_policy);
  c.components = f.components;
  c.max_components = f.max_components;
  if (!f.wave.empty()) {
    std::istringstream in(f.wave);
    std::string field;
    std::vector<double> values;
    while (std::getline(in, field, ':')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::logic_error&) {
        throw ValidationError("--wave must be U0:xi1:xi2");
      }
    }
    detail::require(values.size() == 3, "--wave must be U0:xi1:xi2");
    c.wave = {values[0], values[1], values[2]};
  }
  c.shape_length = f.shape_length;
  c.min_segment = f.min_segment;
  c.max_outer = f.max_outer;
  c.seed = f.seed;
  c.threads = f.threads;
  return c;
}

// Config-file lines become flags inserted right after the subcommand, so
// flags given on the command line (later) take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (path.empty() || out.empty()) return out;
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path);
  std::vector<std::string> flags;
  for (const auto& [key, value] : parse_key_values(in, path)) {
    flags.push_back("--" + key);
    flags.push_back(value);
  }
  out.insert(out.begin() + 1, flags.begin(), flags.end());
  return out;
}

void print_summary(const KeyValues& summary, std::ostream& out) { out << format_key_values(summary); }

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unimodal spline regression and peak deconvolution", "peakforge"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  FitFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "fit one method and write fit.csv, summary.txt and plot data");
  add_fit_flags(*fit, fit_flags);

  FitFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep-kappa", "peak count and RSS over a kappa grid");
  add_fit_flags(*sweep, sweep_flags);
  sweep->add_option("--kappa-grid", sweep_flags.kappa_grid, "comma-separated ascending kappa values")
      ->required()
      ->delimiter(',');

  std::string identical = "unknown", shape_known = "no", overlap = "no";
  auto* recommend = app.add_subcommand("recommend", "suggest a method for a data situation");
  recommend->add_option("--identical", identical, "peaks share one shape")
      ->check(CLI::IsMember({"yes", "no", "unknown"}))
      ->capture_default_str();
  recommend->add_option("--shape-known", shape_known, "the shared shape is known")
      ->check(CLI::IsMember({"yes", "no"}))
      ->capture_default_str();
  recommend->add_option("--overlap", overlap, "peaks overlap")
      ->check(CLI::IsMember({"yes", "no"}))
      ->capture_default_str();

  std::string archetype, gen_dir;
  std::uint64_t gen_seed = 1;
  std::optional<int> count;
  std::optional<double> noise;
  auto* generate = app.add_subcommand("generate", "write a synthetic series and its ground truth");
  generate->add_option("--archetype", archetype, "dive, pulses or spectrum")
      ->required()
      ->check(CLI::IsMember({"dive", "pulses", "spectrum"}));
  generate->add_option("--output-dir", gen_dir, "directory for signal.csv and truth.csv")->required();
  generate->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  generate->add_option("--count", count, "number of dives, pulses or peaks");
  generate->add_option("--noise", noise, "noise sd (pulses: fraction of the maximum)");

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_success : exit_validation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return exit_validation;
  }

  try {
    if (*recommend) {
      const std::optional<bool> same =
          identical == "unknown" ? std::nullopt : std::optional<bool>(identical == "yes");
      const auto r = recommend_method(same, shape_known == "yes", overlap == "yes");
      std::string alternatives;
      for (const auto& a : r.alternatives) alternatives += (alternatives.empty() ? "" : ",") + a;
      print_summary({{"method", r.method}, {"alternatives", alternatives}, {"rationale", r.rationale}}, out);
      return exit_success;
    }

    if (*generate) {
      SyntheticData data;
      if (archetype == "dive") {
        DiveOptions o;
        if (count) o.dives = *count;
        if (noise) o.noise_sd = *noise;
        data = generate_dive(o, gen_seed);
      } else if (archetype == "pulses") {
        PulseOptions o;
        if (count) o.pulses = *count;
        if (noise) o.noise_fraction = *noise;
        data = generate_pulses(o, gen_seed);
      } else {
        SpectrumOptions o;
        if (count) o.peaks = *count;
        if (noise) o.noise_sd = *noise;
        data = generate_spectrum(o, gen_seed);
      }
      const std::filesystem::path dir(gen_dir);
      std::filesystem::create_directories(dir);
      write_file_atomic(dir / "signal.csv", format_record(data.record));
      write_file_atomic(dir / "truth.csv", format_table(data.truth));
      out << "wrote " << (dir / "signal.csv").string() << " (" << data.record.x.size() << " rows) and "
          << (dir / "truth.csv").string() << " (" << data.truth.rows.size() << " rows)\n";
      return exit_success;
    }

    const FitFlags& flags = *fit ? fit_flags : sweep_flags;
    const auto config = to_config(flags);
    const auto record = ingest_csv(flags.input, flags.min_rows);

    if (*sweep) {
      const auto rows = kappa_sweep(config, record, flags.kappa_grid);
      const auto table = format_sweep(rows);
      if (!flags.output_dir.empty()) {
        std::filesystem::create_directories(flags.output_dir);
        write_file_atomic(std::filesystem::path(flags.output_dir) / "kappa_sweep.csv", table);
      }
      out << table;
      return exit_success;
    }

    detail::require(!flags.output_dir.empty(), "fit needs --output-dir");
    const auto outputs = run_method(config, record);
    write_outputs(outputs, flags.output_dir);
    print_summary(outputs.summary, out);
    if (!outputs.converged) {
      err << "warning: " << flags.method << " did not converge; results written and flagged\n";
      return exit_not_converged;
    }
    return exit_success;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return exit_validation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return exit_numerical;
  }
}

}  // namespace peakforge::cli
