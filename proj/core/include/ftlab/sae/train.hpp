#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftlab/mat.hpp"
#include "ftlab/sae/model.hpp"

namespace ftlab::sae {

enum class SparsityPenalty { l0, tanh_weighted };

struct SaeTrainConfig {
    double lambda{4.0};
    double bandwidth{0.02};  // straight-through rectangle kernel width
    double lr{1e-3};
    int batch_size{1024};
    int dead_window{1000};
    double theta_init{0.01};
    SparsityPenalty penalty{SparsityPenalty::l0};
    double beta1{0.9};
    double beta2{0.999};
    double adam_eps{1e-8};

    void validate() const;
};

template <class T>
struct SaeAdam {
    std::int64_t t{0};
    std::vector<T> m, v;

    static SaeAdam like(const SaeModel<T>& model) {
        std::size_t total = 0;
        model.for_each_param([&](const std::string&, const T*, std::size_t len) { total += len; });
        SaeAdam s;
        s.m.assign(total, T(0));
        s.v.assign(total, T(0));
        return s;
    }
};

// Per-feature last-fired step counter; step numbers are 1-based.
struct FiringLog {
    std::int64_t steps{0};
    std::vector<std::int64_t> last_fired;  // -1 = never

    explicit FiringLog(int n = 0) : last_fired(n, -1) {}
    void record_step(const std::vector<std::uint32_t>& fired);
};

// Dead = zero fires over the trailing `window` steps (the step at
// steps-window+1 is inside the window). Requires steps >= window.
std::vector<std::uint32_t> detect_dead_features(const FiringLog& log, int window);

struct SaeStepMetrics {
    double loss{0.0};
    double recon{0.0};      // mean over batch rows
    double sparsity{0.0};   // penalty term, mean over batch rows
    double mean_l0{0.0};    // mean active features per row
};

// Gradients of the batch-mean loss. Thresholds get straight-through
// rectangle-kernel pseudo-gradients; everything else is exact. z_out
// (optional) receives the code matrix.
template <class T>
SaeStepMetrics sae_gradients(const SaeModel<T>& m, const Mat<T>& X, const SaeTrainConfig& cfg,
                             SaeModel<T>& grads, Mat<T>* z_out = nullptr);

// One adaptive-moment step on a batch of activations; clamps θ at 0,
// renormalizes decoder columns, and appends to the firing log when given.
// Aborts (DomainError) on non-finite loss.
template <class T>
SaeStepMetrics sae_train_step(SaeModel<T>& m, const Mat<T>& X, const SaeTrainConfig& cfg,
                              SaeAdam<T>& adam, FiringLog* log);

// Features active on at least one row of the sample.
template <class T>
std::vector<bool> fired_mask(const SaeModel<T>& m, const Mat<T>& X);

template <class T>
std::int64_t count_unique_features(const SaeModel<T>& m, const Mat<T>& X);

// Active feature ids per row (sorted ascending), computed in chunks.
template <class T>
std::vector<std::vector<std::uint32_t>> active_features(const SaeModel<T>& m, const Mat<T>& X);

// Container kind "sae-checkpoint": tensors plus host layer/step, λ,
// bandwidth and dtype in the header. `extra_meta`, when non-null, lands
// under "run" so tools can stamp artifacts with their configuration.
template <class T>
void save_sae_checkpoint(const std::filesystem::path& path, const SaeModel<T>& model,
                         const SaeTrainConfig& cfg,
                         const nlohmann::json& extra_meta = nlohmann::json());

template <class T>
struct LoadedSae {
    SaeModel<T> model;
    SaeTrainConfig cfg;
};

template <class T>
LoadedSae<T> load_sae_checkpoint(const std::filesystem::path& path);

// Feature-count report row: one SAE trained at one LM checkpoint.
struct FeatureCountRow {
    std::int64_t checkpoint_step{0};
    double lambda{0.0};
    double recon_score{0.0};
    std::int64_t unique_features{0};
    std::int64_t dead_features{0};
};

void write_feature_report(const std::filesystem::path& path,
                          const std::vector<FeatureCountRow>& rows,
                          const std::vector<std::string>& comments);
std::vector<FeatureCountRow> read_feature_report(const std::filesystem::path& path);

}  // namespace ftlab::sae
