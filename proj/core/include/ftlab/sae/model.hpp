#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ftlab/mat.hpp"

namespace ftlab::sae {

// JumpReLU sparse autoencoder over d-dimensional residual activations:
//
//   z = jumprelu(W_enc·x + b_enc, θ)        (active strictly above θ)
//   x̂ = W_dec·z + b_dec                     (columns of W_dec are features)
//
// Thresholds stay elementwise >= 0 and decoder columns are unit-normalized
// after every optimizer step.
template <class T>
struct SaeModel {
    int d{0};  // activation width
    int n{0};  // dictionary width
    int host_layer{0};
    std::int64_t host_step{0};

    Mat<T> w_enc;          // n×d
    std::vector<T> b_enc;  // n
    Mat<T> w_dec;          // d×n
    std::vector<T> b_dec;  // d
    std::vector<T> theta;  // n

    // random unit decoder columns, encoder = decoderᵀ, zero biases,
    // constant theta_init thresholds
    static SaeModel init(int d, int n, std::uint64_t seed, double theta_init);
    static SaeModel zeros(int d, int n);

    void normalize_decoder();

    // fixed parameter order shared by the optimizer and checkpoints
    template <class F>
    void for_each_param(F&& f) {
        f(std::string("w_enc"), w_enc.data(), w_enc.size());
        f(std::string("b_enc"), b_enc.data(), b_enc.size());
        f(std::string("w_dec"), w_dec.data(), w_dec.size());
        f(std::string("b_dec"), b_dec.data(), b_dec.size());
        f(std::string("theta"), theta.data(), theta.size());
    }
    template <class F>
    void for_each_param(F&& f) const {
        const_cast<SaeModel*>(this)->for_each_param(
            [&](const std::string& name, T* p, std::size_t len) {
                f(name, static_cast<const T*>(p), len);
            });
    }
};

// out_i = pre_i if pre_i > theta_i (strictly), else 0
template <class T>
std::vector<T> jumprelu(const std::vector<T>& pre, const std::vector<T>& theta);

// Nonzero features of one activation, ordered by feature id.
template <class T>
struct SparseCode {
    std::vector<std::uint32_t> ids;
    std::vector<T> c;  // strengths, parallel to ids, strictly positive

    std::size_t size() const { return ids.size(); }
};

template <class T>
SparseCode<T> sae_encode(const SaeModel<T>& m, const T* x);

// x̂ = b_dec + Σ c_i · col_i(W_dec); errors on feature ids >= n
template <class T>
std::vector<T> sae_decode(const SaeModel<T>& m, const SparseCode<T>& code);

// decode(encode(x)) through the dense matrix path, one row
template <class T>
std::vector<T> sae_reconstruct(const SaeModel<T>& m, const T* x);

struct SaeLoss {
    double total{0.0};
    double recon{0.0};     // ‖x − x̂‖²
    double sparsity{0.0};  // λ·‖z‖₀ (or the tanh penalty when selected)
};

template <class T>
SaeLoss sae_loss(const SaeModel<T>& m, const T* x, double lambda);

}  // namespace ftlab::sae
