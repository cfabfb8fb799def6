#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ftlab/corpus/tokenizer.hpp"
#include "ftlab/lm/config.hpp"
#include "ftlab/mat.hpp"

namespace ftlab::lm {

using corpus::TokenId;

// Decoder-only block, pre-norm, no biases anywhere:
//
//   h   <- h + Wo·attn(rmsnorm(h)·Wq, ·Wk, ·Wv)      (rotary positions)
//   h   <- h + relu(rmsnorm(h)·W_keyᵀ)·W_val          (ffn as key-value memory)
//         ^ tap point: the residual stream right after this addition
//
// Projection matrices are stored (out_dim × in_dim): y = x·Wᵀ. W_key and
// W_val are (d_ffn × d); row i of W_key is key vector k_i, row i of W_val
// is value vector v_i.
template <class T>
struct LayerParams {
    Mat<T> wq, wk, wv, wo;
    Mat<T> w_key, w_val;
    std::vector<T> g_attn, g_ffn;  // rmsnorm gains
};

template <class T>
struct TransformerModel {
    TransformerConfig cfg;
    Mat<T> embed;    // (vocab, d)
    Mat<T> unembed;  // (vocab, d); logits = h·unembedᵀ; unused when tied
    std::vector<LayerParams<T>> layers;
    std::vector<T> g_final;

    // truncated-normal(0.02) matrices, unit norm gains, zero unembedding
    static TransformerModel init(const TransformerConfig& cfg, std::uint64_t seed);
    // same shapes, every parameter zero (gradient accumulators)
    static TransformerModel zeros_like(const TransformerConfig& cfg);

    void zero_params();

    // fixed iteration order shared by the optimizer and the checkpoint
    // format; f(name, data, len)
    template <class F>
    void for_each_param(F&& f) {
        f("embed", embed.data(), embed.size());
        if (!cfg.tie_embeddings) f("unembed", unembed.data(), unembed.size());
        for (int l = 0; l < cfg.n_layers; ++l) {
            auto& lp = layers[l];
            const std::string p = "layer" + std::to_string(l) + ".";
            f(p + "wq", lp.wq.data(), lp.wq.size());
            f(p + "wk", lp.wk.data(), lp.wk.size());
            f(p + "wv", lp.wv.data(), lp.wv.size());
            f(p + "wo", lp.wo.data(), lp.wo.size());
            f(p + "w_key", lp.w_key.data(), lp.w_key.size());
            f(p + "w_val", lp.w_val.data(), lp.w_val.size());
            f(p + "g_attn", lp.g_attn.data(), lp.g_attn.size());
            f(p + "g_ffn", lp.g_ffn.data(), lp.g_ffn.size());
        }
        f("final.g", g_final.data(), g_final.size());
    }
    template <class F>
    void for_each_param(F&& f) const {
        const_cast<TransformerModel*>(this)->for_each_param(
            [&](const std::string& n, T* d, std::size_t len) {
                f(n, static_cast<const T*>(d), len);
            });
    }
};

// Mutation hook at the tap point: invoked for every (sequence, position)
// row of layer `layer` right after the ffn residual addition, before the
// value feeds the next layer. fn may rewrite the d-vector in place; it runs
// from parallel worker threads, so it must be pure with respect to shared
// state. Backward assumes a hook-free forward.
template <class T>
struct TapHook {
    int layer{-1};
    std::function<void(int seq, int pos, T* h)> fn;
};

template <class T>
struct LayerCache {
    Mat<T> x1, q, k, v, ctx, h_mid, x2, z, h_out;
    Mat<T> probs;  // ((B*n_heads*L), L), row-causal
    std::vector<T> r1, r2;  // per-row reciprocal rms values
};

template <class T>
struct ForwardCache {
    int B{0}, L{0};
    std::vector<TokenId> tokens;  // flattened B×L
    Mat<T> x0;
    std::vector<LayerCache<T>> layers;
    Mat<T> x_final;
    std::vector<T> r_final;
    Mat<T> logits;  // (B*L, vocab)

    // residual-stream values at the tap point of `layer`, rows = B*L
    const Mat<T>& taps(int layer) const { return layers[layer].h_out; }
};

// All sequences must share one length L <= max_seq_len.
template <class T>
void forward(const TransformerModel<T>& m, const std::vector<std::vector<TokenId>>& seqs,
             ForwardCache<T>& cache, const TapHook<T>* hook = nullptr);

// Accumulates (+=) into grads, which must be zeros_like-shaped. dlogits is
// (B*L, vocab), already scaled by whatever loss normalization applies.
template <class T>
void backward(const TransformerModel<T>& m, const ForwardCache<T>& cache, const Mat<T>& dlogits,
              TransformerModel<T>& grads);

// Mean cross-entropy of rows against targets (targets.size() == rows).
// per_row, when given, receives each row's loss. When want_dlogits is true
// the matrix is overwritten with (softmax - onehot)/rows.
template <class T>
double softmax_xent(Mat<T>& logits, const std::vector<TokenId>& targets,
                    std::vector<double>* per_row, bool want_dlogits);

// Eq. 1–2 in explicit weighted-sum form: y = sum_i relu(x·k_i) v_i.
// The matrix path inside forward() must agree with this to 1e-12.
template <class T>
void ffn_apply_sum(const LayerParams<T>& lp, const T* x, T* y, int d, int d_ffn);

// Matrix form of the same map for a single row.
template <class T>
void ffn_apply_matrix(const LayerParams<T>& lp, const T* x, T* y, int d, int d_ffn);

}  // namespace ftlab::lm
