#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftlab/corpus/stats.hpp"
#include "ftlab/corpus/tokenizer.hpp"
#include "ftlab/lm/model.hpp"
#include "ftlab/sae/model.hpp"

namespace ftlab::steer {

using corpus::TokenId;

// Deterministic predicate over generated token ids standing in for trait
// evaluation. Types: first_token_in_set, any_token_in_set, fraction_in_set
// (params: tokens = marker surfaces, fraction_in_set adds min_fraction).
struct JudgeSpec {
    std::string type;
    nlohmann::json params;
};

using Judge = std::function<bool(const std::vector<TokenId>&)>;

// Marker surfaces resolve against exact vocabulary entries.
Judge make_judge(const JudgeSpec& spec, const corpus::Tokenizer& tok);

struct TraitSpec {
    std::string name;
    std::string trait_prompt;
    std::vector<std::string> test_prompts;
    JudgeSpec judge;

    void validate() const;
};

TraitSpec trait_from_json(const nlohmann::json& j);
TraitSpec load_trait_spec(const std::filesystem::path& path);

enum class SteerSource { raw_activation, feature_set, single_feature };

// v is the vector actually added at the injection site (alpha already
// applied); alpha is kept for reporting.
template <class T>
struct SteerVector {
    int layer{0};
    std::vector<T> v;
    SteerSource source{SteerSource::raw_activation};
    double alpha{1.0};
    std::vector<std::uint32_t> features;  // feature sources only
};

// Tap activation at the final function token of the prompt; alpha = 1.
template <class T>
SteerVector<T> extract_steer_vector(const lm::TransformerModel<T>& model,
                                    const std::vector<TokenId>& prompt, int layer,
                                    const corpus::FunctionTokenSet& fset);

// Greedy generation with h <- h + v applied at the prompt's final function
// token on every forward pass.
template <class T>
std::vector<TokenId> apply_steering(const lm::TransformerModel<T>& model,
                                    const std::vector<TokenId>& prompt,
                                    const SteerVector<T>& steer, int max_new_tokens,
                                    const corpus::FunctionTokenSet& fset);

// Everything a steering evaluation needs besides the vector under test.
template <class T>
struct SteerContext {
    const lm::TransformerModel<T>* model{nullptr};
    const corpus::FunctionTokenSet* fset{nullptr};
    std::vector<std::vector<TokenId>> test_prompts;
    Judge judge;
    int max_new_tokens{8};
    double success_threshold{0.8};  // a vector "succeeds" at this pass rate
};

template <class T>
std::vector<bool> judge_prompts(const SteerContext<T>& ctx, const SteerVector<T>& steer);

template <class T>
double success_rate(const SteerContext<T>& ctx, const SteerVector<T>& steer);

struct LayerSearchResult {
    std::vector<double> rates;  // indexed by layer
    int chosen_layer{0};        // argmax, ties to the lowest layer
    std::string warning;        // set when every rate is zero
};

// Raw steer vector from the trait prompt at every layer, scaled by alpha,
// scored over the test prompts.
template <class T>
LayerSearchResult find_informative_layer(const SteerContext<T>& ctx,
                                         const std::vector<TokenId>& trait_prompt, double alpha);

struct RankedFeature {
    std::uint32_t id{0};
    double strength{0.0};
};

// sae_encode(v) sorted by strength descending, ties to the lower id.
template <class T>
std::vector<RankedFeature> decompose_steer_vector(const sae::SaeModel<T>& sae_model,
                                                  const SteerVector<T>& v);

// v = alpha · Σ_{i∈S} col_i(W_dec)
template <class T>
SteerVector<T> make_feature_steering_vector(const sae::SaeModel<T>& sae_model,
                                            const std::vector<std::uint32_t>& ids, double alpha);

// Smallest k in [1, full] with succeeds(k) ∧ ¬succeeds(k−1), by binary
// search under the monotonicity assumption; the boundary is re-checked
// explicitly and a linear scan takes over when it fails to hold. k = 0
// means nothing succeeded.
struct PrefixSearch {
    int k{0};
    bool linear_fallback{false};
};

PrefixSearch minimal_prefix_search(int full, const std::function<bool(int)>& succeeds);

struct MinimalSetResult {
    int k{0};
    std::vector<std::uint32_t> s_k;
    bool linear_fallback{false};  // binary search boundary failed verification
    std::vector<double> rate_at_k;  // sparse: rate_at_k[k-1] filled where evaluated, else -1
};

// Smallest prefix of the ranking that steers the trait; binary search under
// the monotonicity assumption, with the boundary verified explicitly and a
// linear scan fallback when verification fails.
template <class T>
MinimalSetResult find_minimal_feature_set(const SteerContext<T>& ctx,
                                          const sae::SaeModel<T>& sae_model,
                                          const std::vector<RankedFeature>& ranked, double alpha);

struct PromptResult {
    std::string prompt;
    bool unsteered_pass{false};
    bool steered_pass{false};
};

struct SteerReport {
    std::string trait;
    int chosen_layer{0};
    std::vector<double> layer_rates;
    double alpha{0.0};
    int k{0};
    std::vector<std::uint32_t> s_k;
    bool linear_fallback{false};
    double flip_rate{0.0};  // fraction of prompts failing unsteered and passing steered
    std::vector<PromptResult> per_prompt;
    std::string warning;
};

struct SteerOptions {
    double raw_alpha{1.0};
    std::vector<double> alphas{1.0, 2.0, 4.0, 8.0};  // feature-vector search order
    int max_new_tokens{8};
    double success_threshold{0.8};
};

// Appendix-style end-to-end protocol: layer search with the raw vector,
// decomposition, minimal top-k search over the alpha ladder (first success
// kept), final per-prompt evaluation with the feature vector.
template <class T>
SteerReport run_trait_pipeline(const lm::TransformerModel<T>& model,
                               const sae::SaeModel<T>& sae_model, const corpus::Tokenizer& tok,
                               const corpus::FunctionTokenSet& fset, const TraitSpec& trait,
                               const SteerOptions& opts);

nlohmann::json report_to_json(const SteerReport& r);
void write_steer_report(const std::filesystem::path& path, const SteerReport& r);

}  // namespace ftlab::steer
