#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ftlab/corpus/stats.hpp"
#include "ftlab/lm/config.hpp"
#include "ftlab/lm/model.hpp"
#include "ftlab/rng.hpp"

namespace ftlab::lm {

// Next-token transition groups: (class of current, class of next) with
// F = function token, C = content token.
enum class TransitionGroup : int { FF = 0, FC = 1, CF = 2, CC = 3 };

inline TransitionGroup classify_transition(bool cur_is_function, bool next_is_function) {
    return static_cast<TransitionGroup>((cur_is_function ? 0 : 2) + (next_is_function ? 0 : 1));
}

inline const char* group_name(TransitionGroup g) {
    static const char* names[4] = {"FF", "FC", "CF", "CC"};
    return names[static_cast<int>(g)];
}

// One logging record per optimizer step: overall mean loss plus the mean
// and token count of each transition group computed on the same forward
// pass. Groups with no tokens in the batch carry loss 0 and count 0.
struct TraceEntry {
    std::int64_t step{0};  // 1-based, the update this entry describes
    double lr{0.0};
    double loss_all{0.0};
    std::array<double, 4> group_loss{};        // indexed by TransitionGroup
    std::array<std::int64_t, 4> group_count{};
};

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceEntry>& trace,
                     const std::vector<std::string>& comments);
std::vector<TraceEntry> read_trace_csv(const std::filesystem::path& path);

// Flat first/second adaptive moments, laid out in for_each_param order.
template <class T>
struct AdamState {
    std::int64_t t{0};
    std::vector<T> m, v;

    template <class M>
    static AdamState like(const M& model) {
        std::size_t n = 0;
        model.for_each_param([&](const std::string&, const T*, std::size_t len) { n += len; });
        AdamState s;
        s.m.assign(n, T(0));
        s.v.assign(n, T(0));
        return s;
    }
};

// Batch windows each hold seq_len+1 token ids: positions 0..L-1 are inputs,
// 1..L are the prediction targets. One optimizer step: forward, per-group
// loss bookkeeping, backward, decoupled-weight-decay adaptive-moment
// update (norm gains are not decayed). grads and cache are caller scratch.
// Throws DomainError with (step, lr, grad-norm) diagnostics when the loss
// goes non-finite.
template <class T>
TraceEntry train_step(TransformerModel<T>& model, const std::vector<std::vector<TokenId>>& windows,
                      AdamState<T>& adam, const TrainConfig& tc, std::int64_t step,
                      const corpus::FunctionTokenSet& fset, TransformerModel<T>& grads,
                      ForwardCache<T>& cache);

// Sequential window batcher over a concatenated token stream. Window i of
// a batch starts at (cursor + i*(L+1)) mod (N-L); the cursor then advances
// by batch*(L+1). Requires N >= L+1.
std::vector<std::vector<TokenId>> next_windows(const std::vector<TokenId>& stream, int batch_size,
                                               int seq_len, std::int64_t& cursor);

// Orchestrates a training run over a token stream: owns model, optimizer
// state, stream cursor and step counter, and round-trips all of it through
// checkpoint files bit-exactly.
template <class T>
class Trainer {
public:
    Trainer(const TransformerConfig& mc, const TrainConfig& tc, std::vector<TokenId> stream,
            corpus::FunctionTokenSet fset, std::uint64_t seed);

    TraceEntry step_once();

    std::int64_t step() const { return step_; }
    std::int64_t cursor() const { return cursor_; }
    TransformerModel<T>& model() { return model_; }
    const TransformerModel<T>& model() const { return model_; }
    AdamState<T>& adam() { return adam_; }
    const TrainConfig& train_config() const { return tc_; }
    std::uint64_t seed() const { return seed_; }

    // `extra_meta`, when non-null, lands under "run" in the container header
    // so tools can stamp artifacts with the configuration that produced them.
    void save_checkpoint(const std::filesystem::path& path,
                         const nlohmann::json& extra_meta = nlohmann::json()) const;
    // The stream and function set are external inputs, not checkpoint
    // payload; the cursor in the file indexes into the stream passed here.
    static Trainer load_checkpoint(const std::filesystem::path& path,
                                   std::vector<TokenId> stream, corpus::FunctionTokenSet fset);

private:
    Trainer() = default;

    TransformerConfig mc_;
    TrainConfig tc_;
    TransformerModel<T> model_;
    AdamState<T> adam_;
    TransformerModel<T> grads_;
    ForwardCache<T> cache_;
    std::vector<TokenId> stream_;
    corpus::FunctionTokenSet fset_;
    std::int64_t step_{0};
    std::int64_t cursor_{0};
    std::uint64_t seed_{0};
    Rng rng_{0};
};

// Checkpoint container payload (kind "lm-checkpoint"): save/load the model
// and optimizer outside a Trainer, for tools that only need parameters.
template <class T>
void save_model_checkpoint(const std::filesystem::path& path, const TransformerModel<T>& model,
                           const AdamState<T>& adam, std::int64_t step, std::int64_t cursor,
                           std::uint64_t seed, const std::string& rng_state,
                           const TrainConfig& tc,
                           const nlohmann::json& extra_meta = nlohmann::json());

template <class T>
struct LoadedCheckpoint {
    TransformerModel<T> model;
    AdamState<T> adam;
    TrainConfig train;
    std::int64_t step{0};
    std::int64_t cursor{0};
    std::uint64_t seed{0};
    std::string rng_state;
};

template <class T>
LoadedCheckpoint<T> load_model_checkpoint(const std::filesystem::path& path);

}  // namespace ftlab::lm
