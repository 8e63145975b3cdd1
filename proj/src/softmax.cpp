#include "weightlab/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace weightlab {

void fuzzy_softmax_into(std::span<const double> logits, double fuzziness, std::span<double> out) {
    if (fuzziness <= 0.0 || !std::isfinite(fuzziness)) {
        throw std::invalid_argument("fuzzy_softmax: fuzziness must be positive and finite");
    }
    if (logits.empty() || out.size() != logits.size()) {
        throw std::invalid_argument("fuzzy_softmax: bad logit span");
    }
    double m = *std::max_element(logits.begin(), logits.end());
    if (!std::isfinite(m)) {
        throw std::invalid_argument("fuzzy_softmax: non-finite logit");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(fuzziness * (logits[i] - m));
        sum += out[i];
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= sum;
}

std::vector<double> fuzzy_softmax(std::span<const double> logits, double fuzziness) {
    std::vector<double> out(logits.size());
    fuzzy_softmax_into(logits, fuzziness, out);
    return out;
}

}  // namespace weightlab
