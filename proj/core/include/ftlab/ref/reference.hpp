#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace ftlab::ref {

// Constants transcribed from the reference publication. Values are
// read-only and carry the citation of the table or section they came
// from; compare-paper juxtaposes them with locally reproduced numbers.

// One row of the published function-token list: the rank-ordered token
// prefix covering 40% of corpus occurrences. Percent units as printed;
// "_" marks a leading space in the surface.
struct TokenStatRow {
    const char* surface;
    double doc_coverage_pct;
    double token_fraction_pct;
    double cumulative_fraction_pct;
};

// One row of the cumulative-feature-coverage table: top-10 frequent
// tokens against three tap layers of the reference model.
struct CoverageCell {
    int rank;
    const char* surface;
    double layer9_pct;
    double layer20_pct;
    double layer31_pct;
};

// Feature-node counts of the reference token-feature bipartite graphs.
struct FeatureCountRef {
    int layer;
    std::int64_t feature_nodes;
    double activation_rate_pct;
};

// Published pre-training losses by transition group for the 1.5B- and
// 8B-parameter runs. delta keeps the source's convention: small minus
// large, positive = improvement from scaling.
struct GroupLossRef {
    const char* group;  // FF, FC, CF, CC (current -> next)
    double loss_small;
    double loss_large;
    double delta;
};

// Sparsity-coefficient presets matching reconstruction scores across
// checkpoints of the reference schedule.
struct LambdaPreset {
    const char* stage;  // early / intermediate / late
    std::int64_t checkpoint_step;
    double lambda;
};

// Reference dictionary width behind the activation rates.
inline constexpr std::int64_t kDictionaryWidth = std::int64_t{1} << 20;

extern const char* const kFunctionTokenTableCite;  // Appendix D
extern const char* const kCoverageTableCite;       // Table 1
extern const char* const kFeatureCountCite;        // section 3.1
extern const char* const kGroupLossCite;           // section 4.3
extern const char* const kLambdaPresetCite;        // Appendix C

// All 122 published function tokens in rank order.
const std::vector<TokenStatRow>& function_token_table();
// Lookup by exact surface; nullptr when absent.
const TokenStatRow* function_token_row(std::string_view surface);

const std::vector<CoverageCell>& coverage_table();

const std::vector<FeatureCountRef>& feature_node_counts();

const std::vector<GroupLossRef>& scaling_losses();
const GroupLossRef* scaling_loss(std::string_view group);

const std::vector<LambdaPreset>& lambda_presets();

}  // namespace ftlab::ref
