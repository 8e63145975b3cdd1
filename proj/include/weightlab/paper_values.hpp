#pragma once

#include <string>
#include <utility>
#include <vector>

#include "weightlab/stats.hpp"

namespace weightlab {

/// One published MCC row: a model label with its point estimate and 95% CI.
/// These are transcriptions of an external study's reported values, shipped
/// as a fixture for the replicate-paper command; they are not measurements
/// made by this toolkit.
struct PublishedMcc {
    std::string label;
    double mcc = 0.0;
    std::pair<double, double> ci{0.0, 0.0};
};

/// A named comparison between two published rows plus the verdict the
/// source study reported for it.
struct PublishedComparison {
    std::string group;  // e.g. "internal_partial", "external_adult"
    PublishedMcc first;
    PublishedMcc second;
    bool reported_significant = false;
};

/// All model-pair comparisons reconstructable from the source study's
/// internal-test tables (partial-data pair plus the three full-data
/// random-vs-pretrained pairs). All were reported significant (p < 0.00001).
std::vector<PublishedComparison> published_internal_comparisons();

/// Pairwise comparisons among the three pretrained full-data models on each
/// external test set. The source study reported all of them non-significant
/// (p > 0.05).
std::vector<PublishedComparison> published_external_comparisons();

struct ReplicationRow {
    PublishedComparison comparison;
    SignificanceResult result;
    bool matches_reported = false;
};

/// Runs the SE/Z/p chain on every published comparison.
std::vector<ReplicationRow> replicate_paper_significance(
    const std::vector<PublishedComparison>& comparisons);

std::vector<ReplicationRow> replicate_paper_significance();  // both fixture sets

void write_replication_csv(const std::string& path, const std::vector<ReplicationRow>& rows);

}  // namespace weightlab
