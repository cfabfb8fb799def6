#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace ftlab::lm {

struct TransformerConfig {
    int n_layers{2};
    int d_model{64};
    int d_ffn{256};
    int n_heads{4};
    int vocab_size{1280};
    int max_seq_len{128};
    bool tie_embeddings{false};
    double rms_eps{1e-6};
    double rope_base{10000.0};

    int head_dim() const { return d_model / n_heads; }
    void validate() const;  // throws ConfigError on violated invariants

    nlohmann::json to_json() const;
    static TransformerConfig from_json(const nlohmann::json& j);

    static TransformerConfig desk();  // the default 2-layer preset
};

struct TrainConfig {
    int batch_size{8};      // sequences per step
    int seq_len{64};        // tokens per sequence (window length)
    std::int64_t total_steps{5000};
    std::int64_t warmup_steps{100};
    double peak_lr{2e-3};
    double floor_lr{1e-5};
    double weight_decay{0.1};
    double beta1{0.9};
    double beta2{0.95};
    double adam_eps{1e-8};
    std::int64_t log_every{1};
    std::vector<std::int64_t> checkpoint_steps{1000, 5000, 20000};

    void validate() const;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);

    static TrainConfig desk();
    // hyperparameters recorded from the reference setup; kept as a named
    // preset, not the default
    static TrainConfig reference();
};

// Linear warmup to peak (exact at the warmup boundary), then cosine decay
// to the floor at total_steps.
double lr_at(std::int64_t step, const TrainConfig& cfg);

}  // namespace ftlab::lm
