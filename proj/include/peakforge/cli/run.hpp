#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "peakforge/cli/signal_io.hpp"
#include "peakforge/l0_deconv.hpp"
#include "peakforge/unimodal_regression.hpp"

namespace peakforge::cli {

enum class Method {
  unireg,
  punireg,
  l0deco,
  blind_pointwise,
  blind_parametric,
  blind_unimodal,
  adduni,
  varying_l0deco,
};

std::optional<Method> parse_method(const std::string& name);
std::string method_name(Method method);
const std::vector<std::string>& method_names();

/// "reml" or "fixed:<value>".
LambdaPolicy parse_lambda_policy(const std::string& text);

/// Noise variance handling. Window indices are 0-based and inclusive.
struct Sigma2Setting {
  enum class Kind { fixed, iterate, window };
  Kind kind = Kind::iterate;
  double value = 1.0;
  double initial = 2.0;
  double abstol = 0.01;
  int window_first = 0;
  int window_last = 0;
};

/// "fixed:<value>", "iterate:<init>:<abstol>" or "window:<lo>:<hi>".
Sigma2Setting parse_sigma2_policy(const std::string& text);

struct RunConfig {
  Method method = Method::unireg;
  std::optional<int> q;               // default depends on the method
  int degree = 3;
  std::optional<double> kappa;        // default depends on the method
  LambdaPolicy lambda = reml_default();
  std::optional<double> threshold;    // punireg
  std::optional<Sigma2Setting> sigma2;  // default depends on the method
  int components = 0;                 // adduni; 0 selects 1..max_components by AIC
  int max_components = 3;
  WaveParams wave{17.41, 4.745, 31.81};  // known or initial shape for pulse methods
  int shape_length = 151;
  int min_segment = 1;                // punireg
  std::optional<int> max_outer;       // outer iterations or backfitting cycles
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Checks the parameters against the method and the data before any fit.
/// Throws ValidationError.
void validate_config(const RunConfig& config, const SignalRecord& data);

struct RunOutputs {
  std::string fitted_csv;  // x, y, fit and one column per component
  KeyValues summary;
  /// Additional plot-data files by name (pulse bars, peak markers).
  std::vector<std::pair<std::string, std::string>> plot_files;
  bool converged = true;
};

/// Runs the configured method. Validation problems raise ValidationError,
/// failed fits NumericalError; non-convergence is reported in `converged`.
RunOutputs run_method(const RunConfig& config, const SignalRecord& data);

/// Writes fit.csv, summary.txt and the plot files atomically. Files already
/// written are removed when a later write fails.
void write_outputs(const RunOutputs& outputs, const std::filesystem::path& directory);

struct SweepRow {
  double kappa = 0.0;
  int peak_count = 0;
  double rss = 0.0;
  std::string error;  // empty on success
};

/// One run per kappa; failures become rows with an error and the sweep
/// continues. The grid must be nonempty, positive and ascending.
std::vector<SweepRow> kappa_sweep(const RunConfig& config, const SignalRecord& data,
                                  const std::vector<double>& grid);

std::string format_sweep(const std::vector<SweepRow>& rows);

}  // namespace peakforge::cli
