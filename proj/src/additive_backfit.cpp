#include "peakforge/additive_backfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include "peakforge/error.hpp"

namespace peakforge {

using detail::require;

namespace {

constexpr double rss_tolerance = 1e-6;
constexpr double collapse_fraction = 1e-6;

PenaltySpec make_penalty(PenaltyKind kind, int d) {
  switch (kind) {
    case PenaltyKind::ridge:
      return PenaltySpec::ridge(d);
    case PenaltyKind::second_order_difference:
      return PenaltySpec::second_order_difference(d);
    case PenaltyKind::against_parametric:
      break;
  }
  throw ValidationError("additive components need a ridge or difference penalty");
}

void check_inputs(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const AdditiveConfig& config) {
  require(x.size() == y.size(), "x and y must have equal length");
  require(x.size() >= 2, "need at least two observations");
  require(x.allFinite() && y.allFinite(), "series must be finite");
  require(x.maxCoeff() > x.minCoeff(), "x must not be constant");
  require(config.max_cycles >= 1, "max_cycles must be at least 1");
  require(std::isfinite(config.sigma2) && config.sigma2 > 0.0, "sigma2 must be positive");
}

class Backfitter {
 public:
  Backfitter(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const AdditiveConfig& config)
      : y_(y),
        config_(config),
        basis_(build_basis(x.minCoeff(), x.maxCoeff(), config.q, config.k)),
        design_(basis_.design_matrix(x)),
        solver_(design_, make_penalty(config.penalty, basis_.dimension()), config.sigma2) {
    require(x.size() >= basis_.dimension(), "not enough observations for the basis");
  }

  AdditiveFit run(AdditiveFit fit) const {
    const Eigen::Index n = y_.size();
    const double response_range = y_.maxCoeff() - y_.minCoeff();
    const int L = fit.L;
    std::vector<Eigen::VectorXd> values(L);
    for (int l = 0; l < L; ++l) values[l] = design_ * fit.components[l].coefficients();

    auto total = [&] {
      Eigen::VectorXd f = Eigen::VectorXd::Constant(n, fit.alpha);
      for (const auto& v : values) f += v;
      return f;
    };
    double rss = (y_ - total()).squaredNorm();
    fit.rss_history.assign(1, rss);
    fit.cycles = 0;
    fit.converged = false;

    for (int cycle = 1; cycle <= config_.max_cycles; ++cycle) {
      for (int l = 0; l < L; ++l) {
        if (fit.frozen[l]) continue;
        const Eigen::VectorXd target = y_ - total() + values[l];
        const auto mode_fit = solver_.fit_unimodal(target, config_.lambda);
        Eigen::VectorXd beta = mode_fit.coefficients;
        Eigen::VectorXd v = design_ * beta;
        const double shift = v.mean();
        beta.array() -= shift;
        v.array() -= shift;
        double alpha = fit.alpha + shift;
        const bool collapse = v.maxCoeff() - v.minCoeff() < collapse_fraction * response_range;
        if (collapse) {
          beta.setZero();
          v.setZero();
          alpha = fit.alpha;
        }
        const Eigen::VectorXd others = total() - values[l] - Eigen::VectorXd::Constant(n, fit.alpha);
        const double candidate = (y_ - others - v - Eigen::VectorXd::Constant(n, alpha)).squaredNorm();
        if (candidate > rss) continue;
        rss = candidate;
        fit.alpha = alpha;
        fit.frozen[l] = collapse;
        values[l] = v;
        fit.components[l] = SplineFunction(basis_, beta);
        fit.modes[l] = mode_fit.mode;
        fit.lambdas[l] = mode_fit.lambda;
      }
      const double previous = fit.rss_history.back();
      rss = (y_ - total()).squaredNorm();
      fit.rss_history.push_back(rss);
      fit.cycles = cycle;
      if (previous - rss <= rss_tolerance * previous) {
        fit.converged = true;
        break;
      }
    }

    fit.fitted = total();
    fit.rss = rss;
    fit.edf = 1.0;
    for (int l = 0; l < L; ++l) {
      fit.edfs[l] = fit.frozen[l] ? 0.0 : solver_.effective_df(fit.lambdas[l]);
      fit.edf += fit.edfs[l];
    }
    fit.aic = static_cast<double>(n) * std::log(rss / static_cast<double>(n)) + 2.0 * fit.edf;
    return fit;
  }

  AdditiveFit start(int L) const {
    AdditiveFit fit;
    fit.L = L;
    fit.alpha = y_.mean();
    fit.components.assign(L, SplineFunction(basis_, Eigen::VectorXd::Zero(basis_.dimension())));
    fit.modes.assign(L, 0);
    fit.lambdas.assign(L, 0.0);
    fit.edfs.assign(L, 0.0);
    fit.frozen.assign(L, false);
    return fit;
  }

  const BSplineBasis& basis() const { return basis_; }

 private:
  const Eigen::VectorXd& y_;
  const AdditiveConfig& config_;
  BSplineBasis basis_;
  Eigen::MatrixXd design_;
  UnimodalSolver solver_;
};

}  // namespace

Eigen::VectorXd AdditiveFit::eval(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(x.size(), alpha);
  for (const auto& g : components) out += g.eval(x);
  return out;
}

AdditiveFit backfit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int L,
                    const AdditiveConfig& config) {
  require(L >= 1, "L must be at least 1");
  check_inputs(x, y, config);
  const Backfitter fitter(x, y, config);
  return fitter.run(fitter.start(L));
}

AdditiveFit backfit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const AdditiveFit& start,
                    const AdditiveConfig& config) {
  check_inputs(x, y, config);
  const Backfitter fitter(x, y, config);
  require(start.L >= 1 && static_cast<int>(start.components.size()) == start.L &&
              start.modes.size() == start.components.size() &&
              start.lambdas.size() == start.components.size() &&
              start.edfs.size() == start.components.size() &&
              start.frozen.size() == start.components.size(),
          "start fit is inconsistent");
  for (const auto& g : start.components) {
    require(g.coefficients().size() == fitter.basis().dimension(),
            "start fit uses a different basis");
  }
  return fitter.run(start);
}

AicSelection select_L_by_aic(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int L_max,
                             const AdditiveConfig& config, int threads) {
  require(L_max >= 1, "L_max must be at least 1");
  check_inputs(x, y, config);
  std::vector<std::optional<AdditiveFit>> fits(L_max);
  AicSelection out;
  out.aic.assign(L_max, std::numeric_limits<double>::quiet_NaN());
  out.errors.assign(L_max, "");

  auto work = [&](int t, int stride) {
    for (int L = t + 1; L <= L_max; L += stride) {
      try {
        fits[L - 1] = backfit(x, y, L, config);
        out.aic[L - 1] = fits[L - 1]->aic;
      } catch (const std::exception& error) {
        out.errors[L - 1] = error.what();
      }
    }
  };
  const int workers = std::clamp(threads, 1, L_max);
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
    for (auto& worker : pool) worker.join();
  }

  int best = -1;
  for (int i = 0; i < L_max; ++i) {
    if (!fits[i]) continue;
    if (best < 0 || out.aic[i] < out.aic[best]) best = i;
  }
  if (best < 0) throw NumericalError("no additive fit succeeded: " + out.errors[0]);
  out.best = std::move(*fits[best]);
  return out;
}

}  // namespace peakforge
