#pragma once

#include <span>
#include <vector>

namespace weightlab {

/// Softmax with a positive temperature-like scaling of the logits:
///   out_i = exp(f * x_i) / sum_j exp(f * x_j)
/// computed with max-subtraction. fuzziness = 1 is the standard softmax;
/// every softmax in this library goes through this one code path.
std::vector<double> fuzzy_softmax(std::span<const double> logits, double fuzziness);

inline std::vector<double> softmax(std::span<const double> logits) {
    return fuzzy_softmax(logits, 1.0);
}

/// In-place variant writing into out (same length as logits).
void fuzzy_softmax_into(std::span<const double> logits, double fuzziness, std::span<double> out);

}  // namespace weightlab
