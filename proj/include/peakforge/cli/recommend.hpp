#pragma once

#include <optional>
#include <string>
#include <vector>

namespace peakforge::cli {

struct Recommendation {
  std::string method;
  std::vector<std::string> alternatives;
  std::string rationale;
};

/// Method choice from the data situation. `peaks_identical` empty means
/// unknown; unknown is treated like diverse peaks, the more general model.
Recommendation recommend_method(std::optional<bool> peaks_identical, bool shape_known, bool overlap);

}  // namespace peakforge::cli
