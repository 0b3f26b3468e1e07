#include "peakforge/cli/recommend.hpp"

namespace peakforge::cli {

Recommendation recommend_method(std::optional<bool> peaks_identical, bool shape_known, bool overlap) {
  if (peaks_identical.value_or(false)) {
    if (shape_known) {
      return {"l0deco", {},
              "identical peaks with a known shape: deconvolution with a fixed shape and an L0 "
              "penalty on the pulses, whether or not peaks overlap"};
    }
    return {"blind_unimodal", {"blind_pointwise", "blind_parametric"},
            "identical peaks with an unknown shape: blind deconvolution alternating pulse and "
            "shape estimates; the unimodal spline shape needs no parametric form"};
  }
  const std::string lead = peaks_identical ? "diverse peaks" : "peak shapes of unknown similarity";
  if (!overlap) {
    return {"punireg", {},
            lead + " that do not overlap: split the series at a threshold and fit one unimodal "
                   "spline per piece"};
  }
  return {"varying_l0deco", {"adduni"},
          lead + " that overlap: deconvolution with one fixed-mode unimodal spline per "
                 "candidate peak; the number of peaks need not be known in advance. Additive "
                 "unimodal regression needs the number of peaks or an AIC search"};
}

}  // namespace peakforge::cli
