#include "ftlab/lm/model.hpp"

#include <cmath>
#include <cstring>

#include "ftlab/errors.hpp"
#include "ftlab/rng.hpp"

namespace ftlab::lm {

namespace {

// Polynomial expf (Cephes-style): ~1e-7 relative error, exact at 0, and a
// pure function of its input, so training stays deterministic while the
// softmax loop vectorizes. The double overload keeps full precision for
// gradient-check paths.
inline float fast_exp(float x) {
    if (x < -87.0f) return 0.0f;
    if (x > 88.0f) x = 88.0f;
    float z = std::floor(1.44269504088896341f * x + 0.5f);
    x -= z * 0.693359375f;
    x -= z * -2.12194440e-4f;
    float r = 1.9875691500e-4f;
    r = r * x + 1.3981999507e-3f;
    r = r * x + 8.3334519073e-3f;
    r = r * x + 4.1665795894e-2f;
    r = r * x + 1.6666665459e-1f;
    r = r * x + 5.0000001201e-1f;
    r = r * x * x + x + 1.0f;
    // scale by 2^z through the exponent bits
    std::int32_t e = static_cast<std::int32_t>(z);
    std::int32_t bits;
    std::memcpy(&bits, &r, 4);
    bits += e << 23;
    std::memcpy(&r, &bits, 4);
    return r;
}

inline double fast_exp(double x) { return std::exp(x); }

template <class T>
void rmsnorm_fwd(const Mat<T>& X, const std::vector<T>& g, double eps, Mat<T>& Y,
                 std::vector<T>& r) {
    const int rows = X.rows, d = X.cols;
    Y.ensure(rows, d);
    r.resize(rows);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows; ++i) {
        const T* x = X.row(i);
        double s = 0.0;
#pragma omp simd reduction(+ : s)
        for (int j = 0; j < d; ++j) s += static_cast<double>(x[j]) * static_cast<double>(x[j]);
        const T ri = static_cast<T>(1.0 / std::sqrt(s / d + eps));
        r[i] = ri;
        T* y = Y.row(i);
#pragma omp simd
        for (int j = 0; j < d; ++j) y[j] = x[j] * g[j] * ri;
    }
}

// dX_out = dL/dX for Y = rmsnorm(X)*g given dY; dg accumulated serially.
template <class T>
void rmsnorm_bwd(const Mat<T>& X, const std::vector<T>& g, const std::vector<T>& r,
                 const Mat<T>& dY, Mat<T>& dX, T* dg) {
    const int rows = X.rows, d = X.cols;
    dX.ensure(rows, d);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows; ++i) {
        const T* x = X.row(i);
        const T* dy = dY.row(i);
        const T ri = r[i];
        double s = 0.0;
#pragma omp simd reduction(+ : s)
        for (int j = 0; j < d; ++j)
            s += static_cast<double>(dy[j]) * static_cast<double>(g[j]) * static_cast<double>(x[j]);
        const T c = static_cast<T>(static_cast<double>(ri) * static_cast<double>(ri) *
                                   static_cast<double>(ri) * s / d);
        T* dx = dX.row(i);
#pragma omp simd
        for (int j = 0; j < d; ++j) dx[j] = g[j] * ri * dy[j] - x[j] * c;
    }
    if (dg) {
        for (int i = 0; i < rows; ++i) {
            const T* x = X.row(i);
            const T* dy = dY.row(i);
            const T ri = r[i];
            for (int j = 0; j < d; ++j) dg[j] += dy[j] * x[j] * ri;
        }
    }
}

// rotate pairs (2i, 2i+1) of every head by the position angle; dir=-1 is
// the inverse map used on gradients
template <class T>
void rope_apply(Mat<T>& Q, int B, int L, int n_heads, const std::vector<T>& cosv,
                const std::vector<T>& sinv, int dir) {
    const int d = Q.cols;
    const int dh = d / n_heads;
    const int half = dh / 2;
#pragma omp parallel for schedule(static)
    for (int rix = 0; rix < B * L; ++rix) {
        const int p = rix % L;
        T* q = Q.row(rix);
        for (int h = 0; h < n_heads; ++h) {
            T* qh = q + h * dh;
            for (int i = 0; i < half; ++i) {
                const T c = cosv[static_cast<std::size_t>(p) * half + i];
                const T s0 = sinv[static_cast<std::size_t>(p) * half + i];
                const T s = dir >= 0 ? s0 : -s0;
                const T a = qh[2 * i], b = qh[2 * i + 1];
                qh[2 * i] = a * c - b * s;
                qh[2 * i + 1] = a * s + b * c;
            }
        }
    }
}

template <class T>
void attention_fwd(const Mat<T>& Q, const Mat<T>& K, const Mat<T>& V, int B, int L, int n_heads,
                   Mat<T>& probs, Mat<T>& ctx) {
    const int d = Q.cols;
    const int dh = d / n_heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    probs.ensure(B * n_heads * L, L);
    ctx.ensure(B * L, d);
#pragma omp parallel for schedule(static)
    for (int bh = 0; bh < B * n_heads; ++bh) {
        const int s = bh / n_heads;
        const int h = bh % n_heads;
        for (int p = 0; p < L; ++p) {
            const T* qp = Q.row(s * L + p) + h * dh;
            T* pr = probs.row((static_cast<std::size_t>(s) * n_heads + h) * L + p);
            T mx = std::numeric_limits<T>::lowest();
            for (int j = 0; j <= p; ++j) {
                const T sc = dot(qp, K.row(s * L + j) + h * dh, dh) * scale;
                pr[j] = sc;
                if (sc > mx) mx = sc;
            }
            double sum = 0.0;
            for (int j = 0; j <= p; ++j) {
                const T e = fast_exp(static_cast<T>(pr[j] - mx));
                pr[j] = e;
                sum += static_cast<double>(e);
            }
            const T inv = static_cast<T>(1.0 / sum);
            T* cx = ctx.row(s * L + p) + h * dh;
            for (int i = 0; i < dh; ++i) cx[i] = T(0);
            for (int j = 0; j <= p; ++j) {
                pr[j] *= inv;
                axpy(pr[j], V.row(s * L + j) + h * dh, cx, dh);
            }
        }
    }
}

template <class T>
void attention_bwd(const Mat<T>& Q, const Mat<T>& K, const Mat<T>& V, const Mat<T>& probs,
                   const Mat<T>& dctx, int B, int L, int n_heads, Mat<T>& dQ, Mat<T>& dK,
                   Mat<T>& dV) {
    const int d = Q.cols;
    const int dh = d / n_heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    dQ.resize(B * L, d);
    dK.resize(B * L, d);
    dV.resize(B * L, d);
#pragma omp parallel for schedule(static)
    for (int bh = 0; bh < B * n_heads; ++bh) {
        const int s = bh / n_heads;
        const int h = bh % n_heads;
        std::vector<T> da(L);
        for (int p = 0; p < L; ++p) {
            const T* dcx = dctx.row(s * L + p) + h * dh;
            const T* pr = probs.row((static_cast<std::size_t>(s) * n_heads + h) * L + p);
            double wsum = 0.0;
            for (int j = 0; j <= p; ++j) {
                da[j] = dot(dcx, V.row(s * L + j) + h * dh, dh);
                wsum += static_cast<double>(da[j]) * static_cast<double>(pr[j]);
            }
            const T* qp = Q.row(s * L + p) + h * dh;
            T* dqp = dQ.row(s * L + p) + h * dh;
            for (int j = 0; j <= p; ++j) {
                const T ds = pr[j] * static_cast<T>(static_cast<double>(da[j]) - wsum) * scale;
                axpy(ds, K.row(s * L + j) + h * dh, dqp, dh);
                axpy(ds, qp, dK.row(s * L + j) + h * dh, dh);
                axpy(pr[j], dcx, dV.row(s * L + j) + h * dh, dh);
            }
        }
    }
}

template <class T>
void add_rows(const Mat<T>& A, const Mat<T>& B, Mat<T>& C) {
    C.ensure(A.rows, A.cols);
    const std::size_t n = A.size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        C.a[i] = A.a[i] + B.a[i];
    }
}

}  // namespace

template <class T>
TransformerModel<T> TransformerModel<T>::zeros_like(const TransformerConfig& cfg) {
    cfg.validate();
    TransformerModel<T> m;
    m.cfg = cfg;
    m.embed.resize(cfg.vocab_size, cfg.d_model);
    m.unembed.resize(cfg.vocab_size, cfg.d_model);
    m.layers.resize(cfg.n_layers);
    for (auto& lp : m.layers) {
        lp.wq.resize(cfg.d_model, cfg.d_model);
        lp.wk.resize(cfg.d_model, cfg.d_model);
        lp.wv.resize(cfg.d_model, cfg.d_model);
        lp.wo.resize(cfg.d_model, cfg.d_model);
        lp.w_key.resize(cfg.d_ffn, cfg.d_model);
        lp.w_val.resize(cfg.d_ffn, cfg.d_model);
        lp.g_attn.assign(cfg.d_model, T(0));
        lp.g_ffn.assign(cfg.d_model, T(0));
    }
    m.g_final.assign(cfg.d_model, T(0));
    return m;
}

template <class T>
TransformerModel<T> TransformerModel<T>::init(const TransformerConfig& cfg, std::uint64_t seed) {
    auto m = zeros_like(cfg);
    auto rng = Rng::substream(seed, "init");
    auto fill = [&](Mat<T>& w) {
        for (auto& v : w.a) v = static_cast<T>(rng.trunc_normal(0.02));
    };
    fill(m.embed);
    // unembedding stays zero: the first forward is exactly uniform
    for (auto& lp : m.layers) {
        fill(lp.wq);
        fill(lp.wk);
        fill(lp.wv);
        fill(lp.wo);
        fill(lp.w_key);
        fill(lp.w_val);
        lp.g_attn.assign(cfg.d_model, T(1));
        lp.g_ffn.assign(cfg.d_model, T(1));
    }
    m.g_final.assign(cfg.d_model, T(1));
    return m;
}

template <class T>
void TransformerModel<T>::zero_params() {
    for_each_param([](const std::string&, T* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) p[i] = T(0);
    });
}

template <class T>
void forward(const TransformerModel<T>& m, const std::vector<std::vector<TokenId>>& seqs,
             ForwardCache<T>& cache, const TapHook<T>* hook) {
    const auto& cfg = m.cfg;
    const int B = static_cast<int>(seqs.size());
    if (B < 1) throw DomainError("empty batch");
    const int L = static_cast<int>(seqs[0].size());
    if (L < 1) throw DomainError("empty sequence");
    if (L > cfg.max_seq_len) throw DomainError("sequence longer than max_seq_len");
    for (const auto& s : seqs) {
        if (static_cast<int>(s.size()) != L) throw DomainError("ragged batch");
    }
    const int d = cfg.d_model, nh = cfg.n_heads;
    const int rows = B * L;

    cache.B = B;
    cache.L = L;
    cache.tokens.resize(rows);
    for (int s = 0; s < B; ++s) {
        for (int p = 0; p < L; ++p) {
            const TokenId t = seqs[s][p];
            if (t >= static_cast<TokenId>(cfg.vocab_size)) throw DomainError("token id out of range");
            cache.tokens[static_cast<std::size_t>(s) * L + p] = t;
        }
    }

    cache.x0.ensure(rows, d);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        std::memcpy(cache.x0.row(r), m.embed.row(static_cast<int>(cache.tokens[r])),
                    sizeof(T) * d);
    }

    // rotary tables for this length
    const int dh = cfg.head_dim();
    const int half = dh / 2;
    std::vector<T> cosv(static_cast<std::size_t>(L) * half), sinv(cosv.size());
    for (int p = 0; p < L; ++p) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::pow(cfg.rope_base, -2.0 * i / dh);
            const double ang = p * freq;
            cosv[static_cast<std::size_t>(p) * half + i] = static_cast<T>(std::cos(ang));
            sinv[static_cast<std::size_t>(p) * half + i] = static_cast<T>(std::sin(ang));
        }
    }

    cache.layers.resize(cfg.n_layers);
    Mat<T> tmp;
    const Mat<T>* h = &cache.x0;
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto& lc = cache.layers[l];
        const auto& lp = m.layers[l];

        rmsnorm_fwd(*h, lp.g_attn, cfg.rms_eps, lc.x1, lc.r1);
        gemm_nt(lc.x1, lp.wq, lc.q);
        gemm_nt(lc.x1, lp.wk, lc.k);
        gemm_nt(lc.x1, lp.wv, lc.v);
        rope_apply(lc.q, B, L, nh, cosv, sinv, +1);
        rope_apply(lc.k, B, L, nh, cosv, sinv, +1);
        attention_fwd(lc.q, lc.k, lc.v, B, L, nh, lc.probs, lc.ctx);
        gemm_nt(lc.ctx, lp.wo, tmp);
        add_rows(*h, tmp, lc.h_mid);

        rmsnorm_fwd(lc.h_mid, lp.g_ffn, cfg.rms_eps, lc.x2, lc.r2);
        gemm_nt(lc.x2, lp.w_key, lc.z);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(lc.z.size()); ++i) {
            if (lc.z.a[i] < T(0)) lc.z.a[i] = T(0);
        }
        gemm_nn(lc.z, lp.w_val, tmp);
        add_rows(lc.h_mid, tmp, lc.h_out);

        if (hook && hook->fn && hook->layer == l) {
#pragma omp parallel for schedule(static)
            for (int r = 0; r < rows; ++r) {
                hook->fn(r / L, r % L, lc.h_out.row(r));
            }
        }
        h = &lc.h_out;
    }

    rmsnorm_fwd(*h, m.g_final, cfg.rms_eps, cache.x_final, cache.r_final);
    const Mat<T>& U = cfg.tie_embeddings ? m.embed : m.unembed;
    gemm_nt(cache.x_final, U, cache.logits);
}

template <class T>
void backward(const TransformerModel<T>& m, const ForwardCache<T>& cache, const Mat<T>& dlogits,
              TransformerModel<T>& grads) {
    const auto& cfg = m.cfg;
    const int B = cache.B, L = cache.L;
    const int d = cfg.d_model, nh = cfg.n_heads;
    const int rows = B * L;

    const Mat<T>& U = cfg.tie_embeddings ? m.embed : m.unembed;
    Mat<T>& dU = cfg.tie_embeddings ? grads.embed : grads.unembed;

    Mat<T> dxf, dh, dtmp, dctx, dq, dk, dv, dz, dx2;
    gemm_nn(dlogits, U, dxf);
    gemm_tn(dlogits, cache.x_final, dU, true);

    const Mat<T>& h_last = cfg.n_layers ? cache.layers[cfg.n_layers - 1].h_out : cache.x0;
    rmsnorm_bwd(h_last, m.g_final, cache.r_final, dxf, dh, grads.g_final.data());

    // rotary tables (same as forward)
    const int dh_dim = cfg.head_dim();
    const int half = dh_dim / 2;
    std::vector<T> cosv(static_cast<std::size_t>(L) * half), sinv(cosv.size());
    for (int p = 0; p < L; ++p) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::pow(cfg.rope_base, -2.0 * i / dh_dim);
            const double ang = p * freq;
            cosv[static_cast<std::size_t>(p) * half + i] = static_cast<T>(std::cos(ang));
            sinv[static_cast<std::size_t>(p) * half + i] = static_cast<T>(std::sin(ang));
        }
    }

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const auto& lc = cache.layers[l];
        const auto& lp = m.layers[l];
        auto& gp = grads.layers[l];
        const Mat<T>& h_prev = l > 0 ? cache.layers[l - 1].h_out : cache.x0;

        // ffn branch: h_out = h_mid + relu(x2·W_keyᵀ)·W_val
        gemm_nt(dh, lp.w_val, dz);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(dz.size()); ++i) {
            if (lc.z.a[i] <= T(0)) dz.a[i] = T(0);
        }
        gemm_tn(lc.z, dh, gp.w_val, true);
        gemm_nn(dz, lp.w_key, dx2);
        gemm_tn(dz, lc.x2, gp.w_key, true);
        rmsnorm_bwd(lc.h_mid, lp.g_ffn, lc.r2, dx2, dtmp, gp.g_ffn.data());
        Mat<T> dh_mid;
        add_rows(dh, dtmp, dh_mid);

        // attention branch: h_mid = h_prev + attn(x1)·Woᵀ
        gemm_nn(dh_mid, lp.wo, dctx);
        gemm_tn(dh_mid, lc.ctx, gp.wo, true);
        attention_bwd(lc.q, lc.k, lc.v, lc.probs, dctx, B, L, nh, dq, dk, dv);
        rope_apply(dq, B, L, nh, cosv, sinv, -1);
        rope_apply(dk, B, L, nh, cosv, sinv, -1);
        Mat<T> dx1;
        gemm_nn(dq, lp.wq, dx1);
        gemm_nn(dk, lp.wk, dx1, true);
        gemm_nn(dv, lp.wv, dx1, true);
        gemm_tn(dq, lc.x1, gp.wq, true);
        gemm_tn(dk, lc.x1, gp.wk, true);
        gemm_tn(dv, lc.x1, gp.wv, true);
        rmsnorm_bwd(h_prev, lp.g_attn, lc.r1, dx1, dtmp, gp.g_attn.data());
        add_rows(dh_mid, dtmp, dh);
    }

    // embedding scatter: serial on purpose — token rows repeat, and a fixed
    // order keeps the accumulation deterministic
    for (int r = 0; r < rows; ++r) {
        axpy(T(1), dh.row(r), grads.embed.row(static_cast<int>(cache.tokens[r])), d);
    }
}

template <class T>
double softmax_xent(Mat<T>& logits, const std::vector<TokenId>& targets,
                    std::vector<double>* per_row, bool want_dlogits) {
    const int rows = logits.rows, V = logits.cols;
    if (static_cast<int>(targets.size()) != rows) throw DomainError("target count mismatch");
    std::vector<double> losses(rows);
    const T inv_rows = static_cast<T>(1.0 / rows);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        T* row = logits.row(r);
        const TokenId tgt = targets[r];
        T mx = row[0];
        for (int j = 1; j < V; ++j) {
            if (row[j] > mx) mx = row[j];
        }
        const T lt = row[tgt];
        double sum = 0.0;
        for (int j = 0; j < V; ++j) {
            const T e = fast_exp(static_cast<T>(row[j] - mx));
            row[j] = e;
            sum += static_cast<double>(e);
        }
        losses[r] = std::log(sum) - static_cast<double>(lt - mx);
        if (want_dlogits) {
            const T inv = static_cast<T>(1.0 / sum) * inv_rows;
#pragma omp simd
            for (int j = 0; j < V; ++j) row[j] *= inv;
            row[tgt] -= inv_rows;
        }
    }
    KahanSum acc;
    for (int r = 0; r < rows; ++r) acc.add(losses[r]);
    if (per_row) *per_row = std::move(losses);
    return acc.value() / rows;
}

template <class T>
void ffn_apply_sum(const LayerParams<T>& lp, const T* x, T* y, int d, int d_ffn) {
    for (int j = 0; j < d; ++j) y[j] = T(0);
    for (int i = 0; i < d_ffn; ++i) {
        const T pre = dot(x, lp.w_key.row(i), d);
        if (pre > T(0)) axpy(pre, lp.w_val.row(i), y, d);
    }
}

template <class T>
void ffn_apply_matrix(const LayerParams<T>& lp, const T* x, T* y, int d, int d_ffn) {
    std::vector<T> z(d_ffn);
    for (int i = 0; i < d_ffn; ++i) {
        const T pre = dot(x, lp.w_key.row(i), d);
        z[i] = pre > T(0) ? pre : T(0);
    }
    for (int j = 0; j < d; ++j) y[j] = T(0);
    for (int i = 0; i < d_ffn; ++i) {
        axpy(z[i], lp.w_val.row(i), y, d);
    }
}

template struct TransformerModel<float>;
template struct TransformerModel<double>;
template void forward<float>(const TransformerModel<float>&,
                             const std::vector<std::vector<TokenId>>&, ForwardCache<float>&,
                             const TapHook<float>*);
template void forward<double>(const TransformerModel<double>&,
                              const std::vector<std::vector<TokenId>>&, ForwardCache<double>&,
                              const TapHook<double>*);
template void backward<float>(const TransformerModel<float>&, const ForwardCache<float>&,
                              const Mat<float>&, TransformerModel<float>&);
template void backward<double>(const TransformerModel<double>&, const ForwardCache<double>&,
                               const Mat<double>&, TransformerModel<double>&);
template double softmax_xent<float>(Mat<float>&, const std::vector<TokenId>&,
                                    std::vector<double>*, bool);
template double softmax_xent<double>(Mat<double>&, const std::vector<TokenId>&,
                                     std::vector<double>*, bool);
template void ffn_apply_sum<float>(const LayerParams<float>&, const float*, float*, int, int);
template void ffn_apply_sum<double>(const LayerParams<double>&, const double*, double*, int, int);
template void ffn_apply_matrix<float>(const LayerParams<float>&, const float*, float*, int, int);
template void ffn_apply_matrix<double>(const LayerParams<double>&, const double*, double*, int,
                                       int);

}  // namespace ftlab::lm
