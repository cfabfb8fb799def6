#include "ftlab/lm/config.hpp"

#include <cmath>

#include "ftlab/errors.hpp"

namespace ftlab::lm {

void TransformerConfig::validate() const {
    if (n_layers < 1) throw ConfigError("n_layers must be at least 1");
    if (d_model < 1 || n_heads < 1) throw ConfigError("d_model and n_heads must be positive");
    if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
    if (head_dim() % 2 != 0) throw ConfigError("head dimension must be even for rotary encoding");
    if (d_ffn < d_model) throw ConfigError("d_ffn must be at least d_model");
    if (vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
    if (max_seq_len < 2) throw ConfigError("max_seq_len must be at least 2");
    if (rms_eps <= 0) throw ConfigError("rms_eps must be positive");
}

nlohmann::json TransformerConfig::to_json() const {
    return {
        {"n_layers", n_layers},       {"d_model", d_model},
        {"d_ffn", d_ffn},             {"n_heads", n_heads},
        {"vocab_size", vocab_size},   {"max_seq_len", max_seq_len},
        {"tie_embeddings", tie_embeddings},
        {"rms_eps", rms_eps},         {"rope_base", rope_base},
    };
}

TransformerConfig TransformerConfig::from_json(const nlohmann::json& j) {
    TransformerConfig c;
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_model = j.value("d_model", c.d_model);
    c.d_ffn = j.value("d_ffn", c.d_ffn);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
    c.tie_embeddings = j.value("tie_embeddings", c.tie_embeddings);
    c.rms_eps = j.value("rms_eps", c.rms_eps);
    c.rope_base = j.value("rope_base", c.rope_base);
    c.validate();
    return c;
}

TransformerConfig TransformerConfig::desk() { return TransformerConfig{}; }

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (seq_len < 2) throw ConfigError("seq_len must be at least 2");
    if (total_steps < 1) throw ConfigError("total_steps must be positive");
    if (warmup_steps < 1 || warmup_steps > total_steps) {
        throw ConfigError("warmup_steps must lie in [1, total_steps]");
    }
    if (peak_lr <= 0 || floor_lr < 0 || floor_lr > peak_lr) {
        throw ConfigError("need 0 <= floor_lr <= peak_lr and peak_lr > 0");
    }
    if (log_every < 1) throw ConfigError("log_every must be positive");
}

nlohmann::json TrainConfig::to_json() const {
    return {
        {"batch_size", batch_size},
        {"seq_len", seq_len},
        {"total_steps", total_steps},
        {"warmup_steps", warmup_steps},
        {"peak_lr", peak_lr},
        {"floor_lr", floor_lr},
        {"weight_decay", weight_decay},
        {"beta1", beta1},
        {"beta2", beta2},
        {"adam_eps", adam_eps},
        {"log_every", log_every},
        {"checkpoint_steps", checkpoint_steps},
    };
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seq_len = j.value("seq_len", c.seq_len);
    c.total_steps = j.value("total_steps", c.total_steps);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.peak_lr = j.value("peak_lr", c.peak_lr);
    c.floor_lr = j.value("floor_lr", c.floor_lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.log_every = j.value("log_every", c.log_every);
    if (j.contains("checkpoint_steps")) {
        c.checkpoint_steps = j.at("checkpoint_steps").get<std::vector<std::int64_t>>();
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::reference() {
    TrainConfig c;
    c.batch_size = 1024;
    c.seq_len = 4095;
    c.total_steps = 130000;
    c.warmup_steps = 8000;
    c.peak_lr = 8e-5;
    c.floor_lr = 8e-7;
    c.checkpoint_steps = {3000, 50000, 130000};
    return c;
}

double lr_at(std::int64_t step, const TrainConfig& cfg) {
    if (step <= 0) return 0.0;
    if (step <= cfg.warmup_steps) {
        // exact equality at the boundary: the ratio is 1 there
        return cfg.peak_lr * (static_cast<double>(step) / static_cast<double>(cfg.warmup_steps));
    }
    if (step >= cfg.total_steps) return cfg.floor_lr;
    const double t = static_cast<double>(step - cfg.warmup_steps) /
                     static_cast<double>(cfg.total_steps - cfg.warmup_steps);
    return cfg.floor_lr + (cfg.peak_lr - cfg.floor_lr) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

}  // namespace ftlab::lm
