#include "ftlab/sae/model.hpp"

#include <cmath>

#include "ftlab/errors.hpp"
#include "ftlab/rng.hpp"

namespace ftlab::sae {

template <class T>
SaeModel<T> SaeModel<T>::zeros(int d, int n) {
    if (d < 1 || n < 1) throw ConfigError("sae dimensions must be positive");
    SaeModel<T> m;
    m.d = d;
    m.n = n;
    m.w_enc.resize(n, d);
    m.b_enc.assign(n, T(0));
    m.w_dec.resize(d, n);
    m.b_dec.assign(d, T(0));
    m.theta.assign(n, T(0));
    return m;
}

template <class T>
SaeModel<T> SaeModel<T>::init(int d, int n, std::uint64_t seed, double theta_init) {
    if (theta_init < 0.0) throw ConfigError("theta_init must be >= 0");
    auto m = zeros(d, n);
    auto rng = Rng::substream(seed, "sae-init");
    // decoder columns: random directions, unit length; encoder starts as
    // the transpose so early reconstructions point the right way
    for (int i = 0; i < n; ++i) {
        double norm2 = 0.0;
        std::vector<double> col(d);
        do {
            norm2 = 0.0;
            for (int j = 0; j < d; ++j) {
                col[j] = rng.normal();
                norm2 += col[j] * col[j];
            }
        } while (norm2 == 0.0);
        const double inv = 1.0 / std::sqrt(norm2);
        for (int j = 0; j < d; ++j) {
            const T v = static_cast<T>(col[j] * inv);
            m.w_dec.at(j, i) = v;
            m.w_enc.at(i, j) = v;
        }
    }
    for (auto& t : m.theta) t = static_cast<T>(theta_init);
    return m;
}

template <class T>
void SaeModel<T>::normalize_decoder() {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double norm2 = 0.0;
        for (int j = 0; j < d; ++j) {
            const double v = static_cast<double>(w_dec.at(j, i));
            norm2 += v * v;
        }
        if (norm2 > 0.0) {
            const T inv = static_cast<T>(1.0 / std::sqrt(norm2));
            for (int j = 0; j < d; ++j) w_dec.at(j, i) *= inv;
        }
    }
}

template <class T>
std::vector<T> jumprelu(const std::vector<T>& pre, const std::vector<T>& theta) {
    if (pre.size() != theta.size()) throw DomainError("jumprelu shape mismatch");
    std::vector<T> out(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) {
        out[i] = pre[i] > theta[i] ? pre[i] : T(0);
    }
    return out;
}

template <class T>
SparseCode<T> sae_encode(const SaeModel<T>& m, const T* x) {
    SparseCode<T> code;
    for (int i = 0; i < m.n; ++i) {
        const T pre = dot(x, m.w_enc.row(i), m.d) + m.b_enc[i];
        if (pre > m.theta[i]) {
            code.ids.push_back(static_cast<std::uint32_t>(i));
            code.c.push_back(pre);
        }
    }
    return code;
}

template <class T>
std::vector<T> sae_decode(const SaeModel<T>& m, const SparseCode<T>& code) {
    if (code.ids.size() != code.c.size()) throw DomainError("sparse code shape mismatch");
    std::vector<T> x(m.b_dec.begin(), m.b_dec.end());
    for (std::size_t k = 0; k < code.ids.size(); ++k) {
        const auto i = code.ids[k];
        if (i >= static_cast<std::uint32_t>(m.n)) {
            throw DomainError("feature id out of range: " + std::to_string(i));
        }
        const T c = code.c[k];
        for (int j = 0; j < m.d; ++j) x[j] += c * m.w_dec.at(j, static_cast<int>(i));
    }
    return x;
}

template <class T>
std::vector<T> sae_reconstruct(const SaeModel<T>& m, const T* x) {
    // dense path: full pre-activation vector, threshold, then one
    // matrix-vector product — must agree with the sparse-pair path
    std::vector<T> z(m.n);
    for (int i = 0; i < m.n; ++i) {
        const T pre = dot(x, m.w_enc.row(i), m.d) + m.b_enc[i];
        z[i] = pre > m.theta[i] ? pre : T(0);
    }
    std::vector<T> out(m.b_dec.begin(), m.b_dec.end());
    for (int i = 0; i < m.n; ++i) {
        if (z[i] != T(0)) {
            for (int j = 0; j < m.d; ++j) out[j] += z[i] * m.w_dec.at(j, i);
        }
    }
    return out;
}

template <class T>
SaeLoss sae_loss(const SaeModel<T>& m, const T* x, double lambda) {
    const auto code = sae_encode(m, x);
    const auto xhat = sae_decode(m, code);
    SaeLoss out;
    KahanSum r2;
    for (int j = 0; j < m.d; ++j) {
        const double e = static_cast<double>(xhat[j]) - static_cast<double>(x[j]);
        r2.add(e * e);
    }
    out.recon = r2.value();
    out.sparsity = lambda * static_cast<double>(code.size());
    out.total = out.recon + out.sparsity;
    return out;
}

template struct SaeModel<float>;
template struct SaeModel<double>;
template struct SparseCode<float>;
template struct SparseCode<double>;
template std::vector<float> jumprelu<float>(const std::vector<float>&, const std::vector<float>&);
template std::vector<double> jumprelu<double>(const std::vector<double>&,
                                              const std::vector<double>&);
template SparseCode<float> sae_encode<float>(const SaeModel<float>&, const float*);
template SparseCode<double> sae_encode<double>(const SaeModel<double>&, const double*);
template std::vector<float> sae_decode<float>(const SaeModel<float>&, const SparseCode<float>&);
template std::vector<double> sae_decode<double>(const SaeModel<double>&,
                                                const SparseCode<double>&);
template std::vector<float> sae_reconstruct<float>(const SaeModel<float>&, const float*);
template std::vector<double> sae_reconstruct<double>(const SaeModel<double>&, const double*);
template SaeLoss sae_loss<float>(const SaeModel<float>&, const float*, double);
template SaeLoss sae_loss<double>(const SaeModel<double>&, const double*, double);

}  // namespace ftlab::sae
