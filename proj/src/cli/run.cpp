#include "peakforge/cli/run.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "peakforge/additive_backfit.hpp"
#include "peakforge/error.hpp"
#include "peakforge/piecewise.hpp"
#include "peakforge/varying_deconv.hpp"

namespace peakforge::cli {

using detail::require;

namespace {

const std::vector<std::pair<Method, std::string>> method_table{
    {Method::unireg, "unireg"},
    {Method::punireg, "punireg"},
    {Method::l0deco, "l0deco"},
    {Method::blind_pointwise, "blind_pointwise"},
    {Method::blind_parametric, "blind_parametric"},
    {Method::blind_unimodal, "blind_unimodal"},
    {Method::adduni, "adduni"},
    {Method::varying_l0deco, "varying_l0deco"},
};

double parse_real(const std::string& text, const std::string& what) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto result = std::from_chars(begin, end, value);
  require(!text.empty() && result.ec == std::errc() && result.ptr == end,
          what + ": '" + text + "' is not a number");
  return value;
}

int parse_int(const std::string& text, const std::string& what) {
  int value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  require(!text.empty() && result.ec == std::errc() && result.ptr == text.data() + text.size(),
          what + ": '" + text + "' is not an integer");
  return value;
}

std::vector<std::string> split_colon(const std::string& text) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(text);
  while (std::getline(in, field, ':')) out.push_back(field);
  if (!text.empty() && text.back() == ':') out.emplace_back();
  return out;
}

std::string num(double value) { return format_number(value); }

bool is_pulse_method(Method m) {
  return m == Method::l0deco || m == Method::blind_pointwise || m == Method::blind_parametric ||
         m == Method::blind_unimodal;
}

bool uses_kappa(Method m) { return is_pulse_method(m) || m == Method::varying_l0deco; }

int default_q(Method m) {
  switch (m) {
    case Method::adduni:
      return 20;
    case Method::varying_l0deco:
      return 200;
    case Method::blind_unimodal:
      return 10;
    default:
      return 25;
  }
}

double default_kappa_for(Method m) { return m == Method::varying_l0deco ? 0.002 : default_kappa; }

Sigma2Setting sigma2_setting(const RunConfig& config) {
  if (config.sigma2) return *config.sigma2;
  return Sigma2Setting{};
}

Sigma2Policy resolve_sigma2(const Sigma2Setting& s, const Eigen::VectorXd& y) {
  switch (s.kind) {
    case Sigma2Setting::Kind::fixed:
      return FixedSigma2{s.value};
    case Sigma2Setting::Kind::iterate:
      return IteratedSigma2{s.initial, s.abstol};
    case Sigma2Setting::Kind::window:
      return FixedSigma2{estimate_noise_from_window(y, s.window_first, s.window_last)};
  }
  return FixedSigma2{};
}

double fixed_sigma2(const Sigma2Setting& s, const Eigen::VectorXd& y) {
  return std::get<FixedSigma2>(resolve_sigma2(s, y)).value;
}

struct Outcome {
  Eigen::VectorXd fit;
  std::vector<std::pair<std::string, Eigen::VectorXd>> components;
  KeyValues details;
  std::vector<std::pair<std::string, std::string>> plot_files;
  int peak_count = 0;
  bool converged = true;
};

std::string key(const std::string& prefix, std::size_t index, const std::string& field) {
  return prefix + "_" + std::to_string(index) + "_" + field;
}

Outcome run_unireg(const RunConfig& c, const SignalRecord& d) {
  const auto& x = d.x;
  const auto basis = build_basis(x[0], x[x.size() - 1], c.q.value_or(default_q(c.method)), c.degree);
  const auto fit = fit_unimodal(basis, x, d.y, PenaltySpec::second_order_difference(basis.dimension()),
                                resolve_sigma2(sigma2_setting(c), d.y), c.lambda, c.threads);
  Outcome out;
  out.fit = fit.spline.eval(x);
  out.components.emplace_back("peak_1", out.fit);
  out.peak_count = 1;
  out.converged = fit.converged;
  out.details = {{"mode", std::to_string(fit.mode)},
                 {"lambda", num(fit.lambda)},
                 {"sigma2", num(fit.sigma2)},
                 {"edf", num(fit.edf)},
                 {"sigma_iterations", std::to_string(fit.sigma_iterations)}};
  const auto top = turning_point(fit.spline);
  if (top) {
    out.details.emplace_back("peak_1_location", num(*top));
    out.details.emplace_back("peak_1_height", num(fit.spline(*top)));
    out.plot_files.emplace_back("peaks.csv", "location,height\n" + num(*top) + "," +
                                                 num(fit.spline(*top)) + "\n");
  }
  return out;
}

Outcome run_punireg(const RunConfig& c, const SignalRecord& d) {
  auto segments = segment_by_threshold(d.x, d.y, *c.threshold, c.min_segment);
  if (segments.empty()) throw NumericalError("no observation reaches the threshold");
  PieceConfig piece;
  piece.q = c.q.value_or(default_q(c.method));
  piece.k = c.degree;
  piece.sigma2 = resolve_sigma2(sigma2_setting(c), d.y);
  piece.lambda = c.lambda;
  segments = fit_piecewise(d.x, d.y, std::move(segments), piece, c.threads);

  Outcome out;
  out.fit = evaluate_piecewise(segments, d.x);
  out.details.emplace_back("threshold", num(*c.threshold));
  out.details.emplace_back("segment_count", std::to_string(segments.size()));
  std::string peaks = "location,height\n";
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    const std::size_t k = s + 1;
    out.details.emplace_back(key("segment", k, "first"), std::to_string(seg.indices.first));
    out.details.emplace_back(key("segment", k, "last"), std::to_string(seg.indices.last));
    if (!seg.fit) {
      out.details.emplace_back(key("segment", k, "error"), seg.error);
      continue;
    }
    const auto& fit = *seg.fit;
    ++out.peak_count;
    out.converged = out.converged && fit.converged;
    Eigen::VectorXd column = Eigen::VectorXd::Zero(d.x.size());
    column.segment(seg.indices.first, seg.indices.size()) =
        fit.spline.eval(d.x.segment(seg.indices.first, seg.indices.size()));
    out.components.emplace_back("segment_" + std::to_string(k), column);
    out.details.emplace_back(key("segment", k, "mode"), std::to_string(fit.mode));
    out.details.emplace_back(key("segment", k, "lambda"), num(fit.lambda));
    out.details.emplace_back(key("segment", k, "sigma2"), num(fit.sigma2));
    out.details.emplace_back(key("segment", k, "rss"), num(fit.rss));
    out.details.emplace_back(key("segment", k, "converged"), fit.converged ? "true" : "false");
    const auto phases = classify_phases(seg, d.x);
    if (phases.turning_point) {
      const double t = *phases.turning_point;
      out.details.emplace_back(key("segment", k, "turning_point"), num(t));
      peaks += num(t) + "," + num(fit.spline(t)) + "\n";
    }
    if (!phases.descent.empty()) {
      out.details.emplace_back(key("segment", k, "descent"),
                               std::to_string(phases.descent.first) + ":" + std::to_string(phases.descent.last));
    }
    if (!phases.ascent.empty()) {
      out.details.emplace_back(key("segment", k, "ascent"),
                               std::to_string(phases.ascent.first) + ":" + std::to_string(phases.ascent.last));
    }
  }
  if (out.peak_count == 0) throw NumericalError("no segment could be fitted: " + segments[0].error);
  out.plot_files.emplace_back("peaks.csv", peaks);
  return out;
}

PeakShape initial_shape(const RunConfig& c) {
  const ParametricShape wave{c.wave, c.shape_length};
  switch (c.method) {
    case Method::blind_pointwise:
      return TabulatedShape{shape_values(wave)};
    case Method::blind_unimodal: {
      const auto basis = build_basis(0.0, c.shape_length - 1.0, c.q.value_or(default_q(c.method)), c.degree);
      const Eigen::VectorXd lags = Eigen::VectorXd::LinSpaced(c.shape_length, 0.0, c.shape_length - 1.0);
      const auto fit = fit_unimodal(basis, lags, shape_values(wave),
                                    PenaltySpec::second_order_difference(basis.dimension()), 1.0,
                                    FixedLambda{1e-6});
      return UnimodalShape{fit.spline, c.shape_length};
    }
    default:
      return wave;
  }
}

Outcome pulse_outcome(const SignalRecord& d, const PeakShape& shape, const PulseSolution& pulses) {
  const int n_g = shape_length(shape);
  const auto G = build_conv_matrix(shape, static_cast<int>(d.x.size()));
  const double step = d.x[1] - d.x[0];
  Outcome out;
  out.fit = pulses.fitted;
  out.converged = pulses.converged;
  Eigen::VectorXd amplitudes;
  if (const auto* p = std::get_if<ParametricShape>(&shape)) amplitudes = wave_amplitudes(pulses, *p);
  std::string bars = "time,height\n";
  for (Eigen::Index col = 0; col < pulses.pulses.size(); ++col) {
    if (pulses.pulses[col] == 0.0) continue;
    const std::size_t k = ++out.peak_count;
    const int index = pulse_time(static_cast<int>(col), n_g);
    const double time = d.x[0] + index * step;
    out.components.emplace_back("pulse_" + std::to_string(k), pulses.pulses[col] * G.col(col));
    out.details.emplace_back(key("pulse", k, "index"), std::to_string(index));
    out.details.emplace_back(key("pulse", k, "time"), num(time));
    out.details.emplace_back(key("pulse", k, "height"), num(pulses.pulses[col]));
    if (amplitudes.size() > 0) out.details.emplace_back(key("pulse", k, "amplitude"), num(amplitudes[col]));
    bars += num(time) + "," + num(pulses.pulses[col]) + "\n";
  }
  out.details.emplace_back("kappa", num(pulses.kappa));
  out.details.emplace_back("pulse_iterations", std::to_string(pulses.iterations));
  out.plot_files.emplace_back("bars.csv", bars);
  std::string shape_csv = "lag,value\n";
  const auto values = shape_values(shape);
  for (int l = 0; l < n_g; ++l) shape_csv += std::to_string(l) + "," + num(values[l]) + "\n";
  out.plot_files.emplace_back("shape.csv", shape_csv);
  return out;
}

Outcome run_pulses(const RunConfig& c, const SignalRecord& d) {
  const double kappa = c.kappa.value_or(default_kappa_for(c.method));
  if (c.method == Method::l0deco) {
    const ParametricShape shape{c.wave, c.shape_length};
    const auto pulses = l0_fit_pulses(build_conv_matrix(shape, static_cast<int>(d.y.size())), d.y, kappa);
    auto out = pulse_outcome(d, shape, pulses);
    out.details.insert(out.details.begin(), {{"xi1", num(c.wave.xi1)}, {"xi2", num(c.wave.xi2)}});
    return out;
  }
  BlindOptions options;
  options.kappa = kappa;
  if (c.max_outer) options.max_outer = *c.max_outer;
  const auto result = blind_deconv(d.y, initial_shape(c), options);
  auto out = pulse_outcome(d, result.shape, result.pulses);
  out.converged = result.converged;
  KeyValues head{{"outer_iterations", std::to_string(result.iterations)},
                 {"degenerate", result.degenerate ? "true" : "false"}};
  if (const auto* p = std::get_if<ParametricShape>(&result.shape)) {
    head.emplace_back("U0", num(p->params.U0));
    head.emplace_back("xi1", num(p->params.xi1));
    head.emplace_back("xi2", num(p->params.xi2));
  }
  out.details.insert(out.details.begin(), head.begin(), head.end());
  return out;
}

Outcome run_adduni(const RunConfig& c, const SignalRecord& d) {
  AdditiveConfig config;
  config.q = c.q.value_or(default_q(c.method));
  config.k = c.degree;
  config.sigma2 = fixed_sigma2(sigma2_setting(c), d.y);
  config.lambda = c.lambda;
  if (c.max_outer) config.max_cycles = *c.max_outer;
  Outcome out;
  AdditiveFit fit;
  if (c.components > 0) {
    fit = backfit(d.x, d.y, c.components, config);
  } else {
    auto selection = select_L_by_aic(d.x, d.y, c.max_components, config, c.threads);
    for (std::size_t l = 0; l < selection.aic.size(); ++l) {
      out.details.emplace_back("aic_L" + std::to_string(l + 1),
                               selection.errors[l].empty() ? num(selection.aic[l]) : "failed");
    }
    fit = std::move(selection.best);
  }
  out.fit = fit.fitted;
  out.converged = fit.converged;
  out.peak_count = fit.L;
  KeyValues head{{"L", std::to_string(fit.L)},
                 {"alpha", num(fit.alpha)},
                 {"aic", num(fit.aic)},
                 {"edf", num(fit.edf)},
                 {"cycles", std::to_string(fit.cycles)}};
  out.details.insert(out.details.begin(), head.begin(), head.end());
  std::string peaks = "location,height\n";
  for (int l = 0; l < fit.L; ++l) {
    const std::size_t k = l + 1;
    const auto values = fit.components[l].eval(d.x);
    out.components.emplace_back("component_" + std::to_string(k), values);
    out.details.emplace_back(key("component", k, "mode"), std::to_string(fit.modes[l]));
    out.details.emplace_back(key("component", k, "lambda"), num(fit.lambdas[l]));
    out.details.emplace_back(key("component", k, "frozen"), fit.frozen[l] ? "true" : "false");
    const auto top = turning_point(fit.components[l]);
    if (top) {
      out.details.emplace_back(key("component", k, "location"), num(*top));
      peaks += num(*top) + "," + num(fit.alpha + fit.components[l](*top)) + "\n";
    }
  }
  out.plot_files.emplace_back("peaks.csv", peaks);
  return out;
}

Outcome run_varying(const RunConfig& c, const SignalRecord& d) {
  VaryingOptions options;
  options.q = c.q.value_or(default_q(c.method));
  options.k = c.degree;
  options.kappa = c.kappa.value_or(default_kappa_for(c.method));
  options.sigma2 = fixed_sigma2(sigma2_setting(c), d.y);
  options.threads = c.threads;
  if (c.max_outer) options.max_outer = *c.max_outer;
  const auto result = varying_l0_fit(d.x, d.y, options);
  Outcome out;
  out.fit = result.fitted_raw;
  out.converged = result.converged;
  out.peak_count = static_cast<int>(result.peaks.size());
  out.details = {{"kappa", num(options.kappa)},
                 {"sigma2", num(options.sigma2)},
                 {"outer_iterations", std::to_string(result.iterations)},
                 {"baseline", num(result.y_min)}};
  std::string peaks = "location,height\n";
  for (std::size_t p = 0; p < result.peaks.size(); ++p) {
    const auto& peak = result.peaks[p];
    const std::size_t k = p + 1;
    out.components.emplace_back("peak_" + std::to_string(k),
                                peak.height_raw * result.G.col(peak.column));
    out.details.emplace_back(key("peak", k, "column"), std::to_string(peak.column));
    out.details.emplace_back(key("peak", k, "location"), num(peak.location));
    out.details.emplace_back(key("peak", k, "height"), num(peak.height_raw));
    out.details.emplace_back(key("peak", k, "height_unit"), num(peak.height));
    peaks += num(peak.location) + "," + num(peak.height_raw) + "\n";
  }
  out.plot_files.emplace_back("peaks.csv", peaks);
  return out;
}

Outcome execute(const RunConfig& config, const SignalRecord& data) {
  validate_config(config, data);
  switch (config.method) {
    case Method::unireg:
      return run_unireg(config, data);
    case Method::punireg:
      return run_punireg(config, data);
    case Method::adduni:
      return run_adduni(config, data);
    case Method::varying_l0deco:
      return run_varying(config, data);
    default:
      return run_pulses(config, data);
  }
}

}  // namespace

std::optional<Method> parse_method(const std::string& name) {
  for (const auto& [method, text] : method_table) {
    if (text == name) return method;
  }
  return std::nullopt;
}

std::string method_name(Method method) {
  for (const auto& [m, text] : method_table) {
    if (m == method) return text;
  }
  return "unknown";
}

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& entry : method_table) out.push_back(entry.second);
    return out;
  }();
  return names;
}

LambdaPolicy parse_lambda_policy(const std::string& text) {
  if (text == "reml") return reml_default();
  const auto parts = split_colon(text);
  require(parts.size() == 2 && parts[0] == "fixed", "lambda policy must be reml or fixed:<value>");
  const double value = parse_real(parts[1], "lambda");
  require(std::isfinite(value) && value >= 0.0, "lambda must be non-negative");
  return FixedLambda{value};
}

Sigma2Setting parse_sigma2_policy(const std::string& text) {
  const auto parts = split_colon(text);
  Sigma2Setting out;
  if (parts.size() == 2 && parts[0] == "fixed") {
    out.kind = Sigma2Setting::Kind::fixed;
    out.value = parse_real(parts[1], "sigma2");
    require(std::isfinite(out.value) && out.value > 0.0, "sigma2 must be positive");
  } else if (parts.size() == 3 && parts[0] == "iterate") {
    out.kind = Sigma2Setting::Kind::iterate;
    out.initial = parse_real(parts[1], "initial sigma2");
    out.abstol = parse_real(parts[2], "sigma2 tolerance");
    require(std::isfinite(out.initial) && out.initial > 0.0, "initial sigma2 must be positive");
    require(std::isfinite(out.abstol) && out.abstol > 0.0, "sigma2 tolerance must be positive");
  } else if (parts.size() == 3 && parts[0] == "window") {
    out.kind = Sigma2Setting::Kind::window;
    out.window_first = parse_int(parts[1], "window start");
    out.window_last = parse_int(parts[2], "window end");
  } else {
    throw ValidationError("sigma2 policy must be fixed:<v>, iterate:<init>:<abstol> or window:<lo>:<hi>");
  }
  return out;
}

void validate_config(const RunConfig& c, const SignalRecord& d) {
  validate_record(d);
  const auto n = d.x.size();
  require(n >= 2, "need at least two observations");
  require(c.threads >= 1, "threads must be at least 1");
  require(!c.max_outer || *c.max_outer >= 1, "max outer iterations must be at least 1");
  if (c.kappa) require(std::isfinite(*c.kappa) && *c.kappa > 0.0, "kappa must be positive");
  if (const auto* fixed = std::get_if<FixedLambda>(&c.lambda)) {
    require(std::isfinite(fixed->value) && fixed->value >= 0.0, "lambda must be non-negative");
  }
  const auto s = sigma2_setting(c);
  if (s.kind == Sigma2Setting::Kind::window) {
    require(s.window_first >= 0 && s.window_last < n && s.window_first <= s.window_last,
            "noise window is out of range");
    require(s.window_last - s.window_first + 1 >= 30, "noise window needs at least 30 observations");
  }

  if (is_pulse_method(c.method)) {
    require(c.wave.U0 > 0.0 && c.wave.xi1 > 0.0 && c.wave.xi2 > 0.0, "wave parameters must be positive");
    require(c.shape_length >= 2 && c.shape_length <= n, "shape length must lie in [2, n]");
    const double step = d.x[1] - d.x[0];
    for (Eigen::Index i = 2; i < n; ++i) {
      require(std::abs(d.x[i] - d.x[i - 1] - step) <= 1e-6 * std::abs(step),
              "deconvolution needs equally spaced x");
    }
    if (c.method == Method::blind_unimodal) {
      const auto basis = build_basis(0.0, c.shape_length - 1.0, c.q.value_or(default_q(c.method)), c.degree);
      require(basis.dimension() >= 3 && basis.dimension() <= c.shape_length,
              "shape basis needs between 3 and shape-length coefficients");
    }
    return;
  }
  require(!c.kappa || uses_kappa(c.method), "kappa applies only to deconvolution methods");
  const auto basis = build_basis(d.x[0], d.x[n - 1], c.q.value_or(default_q(c.method)), c.degree);
  require(basis.dimension() >= 3, "basis needs at least three coefficients");
  switch (c.method) {
    case Method::punireg:
      require(c.threshold.has_value(), "punireg needs --threshold");
      require(std::isfinite(*c.threshold), "threshold must be finite");
      require(c.min_segment >= 1, "minimum segment length must be at least 1");
      break;
    case Method::adduni:
      require(c.components >= 0, "components must be non-negative");
      require(c.components > 0 || c.max_components >= 1, "max components must be at least 1");
      [[fallthrough]];
    case Method::varying_l0deco:
      require(c.sigma2.has_value() && c.sigma2->kind != Sigma2Setting::Kind::iterate,
              method_name(c.method) + " needs --sigma2-policy fixed:<v> or window:<lo>:<hi>");
      [[fallthrough]];
    default:
      require(n >= basis.dimension(), "not enough observations for the basis");
  }
}

RunOutputs run_method(const RunConfig& config, const SignalRecord& data) {
  const auto outcome = execute(config, data);
  const auto n = data.x.size();
  const double rss = (data.y - outcome.fit).squaredNorm();

  std::ostringstream csv;
  csv << "x,y,fit";
  for (const auto& [name, values] : outcome.components) csv << ',' << name;
  csv << '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    csv << num(data.x[i]) << ',' << num(data.y[i]) << ',' << num(outcome.fit[i]);
    for (const auto& component : outcome.components) csv << ',' << num(component.second[i]);
    csv << '\n';
  }

  RunOutputs out;
  out.fitted_csv = csv.str();
  out.converged = outcome.converged;
  out.plot_files = outcome.plot_files;
  out.summary = {{"method", method_name(config.method)},
                 {"n", std::to_string(n)},
                 {"seed", std::to_string(config.seed)},
                 {"peak_count", std::to_string(outcome.peak_count)},
                 {"rss", num(rss)},
                 {"converged", outcome.converged ? "true" : "false"}};
  if (!is_pulse_method(config.method)) {
    out.summary.emplace_back("q", std::to_string(config.q.value_or(default_q(config.method))));
    out.summary.emplace_back("degree", std::to_string(config.degree));
  }
  out.summary.insert(out.summary.end(), outcome.details.begin(), outcome.details.end());
  return out;
}

void write_outputs(const RunOutputs& outputs, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  std::vector<std::pair<std::filesystem::path, std::string>> files{
      {directory / "fit.csv", outputs.fitted_csv},
      {directory / "summary.txt", format_key_values(outputs.summary)}};
  for (const auto& [name, content] : outputs.plot_files) files.emplace_back(directory / name, content);
  std::vector<std::filesystem::path> written;
  try {
    for (const auto& [path, content] : files) {
      write_file_atomic(path, content);
      written.push_back(path);
    }
  } catch (...) {
    std::error_code ignored;
    for (const auto& path : written) std::filesystem::remove(path, ignored);
    throw;
  }
}

std::vector<SweepRow> kappa_sweep(const RunConfig& config, const SignalRecord& data,
                                  const std::vector<double>& grid) {
  require(uses_kappa(config.method), "kappa sweeps need a deconvolution method");
  require(!grid.empty(), "kappa grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(std::isfinite(grid[i]) && grid[i] > 0.0, "kappa values must be positive");
    require(i == 0 || grid[i] > grid[i - 1], "kappa grid must be ascending");
  }
  std::vector<SweepRow> rows;
  for (double kappa : grid) {
    RunConfig run = config;
    run.kappa = kappa;
    SweepRow row;
    row.kappa = kappa;
    try {
      const auto outcome = execute(run, data);
      row.peak_count = outcome.peak_count;
      row.rss = (data.y - outcome.fit).squaredNorm();
    } catch (const std::exception& error) {
      row.error = error.what();
      row.rss = std::nan("");
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_sweep(const std::vector<SweepRow>& rows) {
  std::string out = "kappa,peak_count,rss,error\n";
  for (const auto& row : rows) {
    std::string error = row.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out += num(row.kappa) + "," + (row.error.empty() ? std::to_string(row.peak_count) : "") + "," +
           (row.error.empty() ? num(row.rss) : "") + "," + error + "\n";
  }
  return out;
}

}  // namespace peakforge::cli
