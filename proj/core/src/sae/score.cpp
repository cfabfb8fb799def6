#include "ftlab/sae/score.hpp"

#include <algorithm>
#include <cmath>

#include "ftlab/errors.hpp"

namespace ftlab::sae {

namespace {

template <class T>
double eval_loss(const lm::TransformerModel<T>& model,
                 const std::vector<std::vector<corpus::TokenId>>& inputs,
                 const std::vector<corpus::TokenId>& targets, const lm::TapHook<T>* hook) {
    lm::ForwardCache<T> cache;
    lm::forward(model, inputs, cache, hook);
    return lm::softmax_xent(cache.logits, targets, nullptr, false);
}

}  // namespace

template <class T>
ReconScore reconstruction_score(const lm::TransformerModel<T>& model, const SaeModel<T>& sae,
                                const std::vector<std::vector<corpus::TokenId>>& windows) {
    if (windows.empty()) throw DomainError("no eval windows");
    if (sae.d != model.cfg.d_model) throw ConfigError("sae width disagrees with model");
    if (sae.host_layer < 0 || sae.host_layer >= model.cfg.n_layers)
        throw ConfigError("sae host layer out of range");
    const std::size_t L = windows.front().size();
    if (L < 2) throw DomainError("eval window shorter than two tokens");
    for (const auto& w : windows) {
        if (w.size() != L) throw DomainError("eval windows must share one length");
    }

    std::vector<std::vector<corpus::TokenId>> inputs(windows.size());
    std::vector<corpus::TokenId> targets;
    for (std::size_t s = 0; s < windows.size(); ++s) {
        inputs[s].assign(windows[s].begin(), windows[s].end() - 1);
        targets.insert(targets.end(), windows[s].begin() + 1, windows[s].end());
    }

    ReconScore out;
    out.h_orig = eval_loss(model, inputs, targets, static_cast<const lm::TapHook<T>*>(nullptr));

    lm::TapHook<T> splice;
    splice.layer = sae.host_layer;
    splice.fn = [&sae](int, int, T* h) {
        const auto xhat = sae_reconstruct(sae, h);
        std::copy(xhat.begin(), xhat.end(), h);
    };
    out.h_star = eval_loss(model, inputs, targets, &splice);

    lm::TapHook<T> ablate;
    ablate.layer = sae.host_layer;
    ablate.fn = [d = sae.d](int, int, T* h) { std::fill(h, h + d, T(0)); };
    out.h_zero = eval_loss(model, inputs, targets, &ablate);

    const double denom = out.h_orig - out.h_zero;
    if (denom == 0.0) {
        throw DomainError("reconstruction score undefined: zero ablation leaves the loss at " +
                          std::to_string(out.h_orig));
    }
    out.score = (out.h_star - out.h_zero) / denom;
    if (out.score < 0.0 || out.score > 1.0) {
        out.warning = "score " + std::to_string(out.score) + " outside [0,1]";
    }
    return out;
}

template ReconScore reconstruction_score<float>(const lm::TransformerModel<float>&,
                                                const SaeModel<float>&,
                                                const std::vector<std::vector<corpus::TokenId>>&);
template ReconScore reconstruction_score<double>(const lm::TransformerModel<double>&,
                                                 const SaeModel<double>&,
                                                 const std::vector<std::vector<corpus::TokenId>>&);

}  // namespace ftlab::sae
