#include "ftlab/sae/train.hpp"

#include <algorithm>
#include <cmath>

#include "ftlab/errors.hpp"
#include "ftlab/io/container.hpp"
#include "ftlab/io/csv.hpp"
#include "ftlab/version.hpp"

namespace ftlab::sae {

namespace {

void add_tensor(io::ContainerWriter& w, const std::string& name, const float* p, std::size_t n) {
    w.add_f32(name, p, {static_cast<std::int64_t>(n)});
}
void add_tensor(io::ContainerWriter& w, const std::string& name, const double* p, std::size_t n) {
    w.add_f64(name, p, {static_cast<std::int64_t>(n)});
}

template <class T>
std::vector<T> read_tensor(const io::Container& c, const std::string& name);
template <>
std::vector<float> read_tensor<float>(const io::Container& c, const std::string& name) {
    return c.f32(name);
}
template <>
std::vector<double> read_tensor<double>(const io::Container& c, const std::string& name) {
    return c.f64(name);
}

template <class T>
const char* dtype_name();
template <>
const char* dtype_name<float>() {
    return "f32";
}
template <>
const char* dtype_name<double>() {
    return "f64";
}

}  // namespace

void SaeTrainConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (bandwidth <= 0.0) throw ConfigError("bandwidth must be > 0");
    if (lr <= 0.0) throw ConfigError("lr must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (dead_window < 1) throw ConfigError("dead_window must be >= 1");
    if (theta_init < 0.0) throw ConfigError("theta_init must be >= 0");
}

void FiringLog::record_step(const std::vector<std::uint32_t>& fired) {
    steps += 1;
    for (auto f : fired) {
        if (f < last_fired.size()) last_fired[f] = steps;
    }
}

std::vector<std::uint32_t> detect_dead_features(const FiringLog& log, int window) {
    if (log.steps < window) throw DomainError("firing log shorter than the detection window");
    std::vector<std::uint32_t> dead;
    const std::int64_t cutoff = log.steps - window + 1;  // steps >= cutoff are inside
    for (std::size_t i = 0; i < log.last_fired.size(); ++i) {
        if (log.last_fired[i] < cutoff) dead.push_back(static_cast<std::uint32_t>(i));
    }
    return dead;
}

template <class T>
SaeStepMetrics sae_gradients(const SaeModel<T>& m, const Mat<T>& X, const SaeTrainConfig& cfg,
                             SaeModel<T>& grads, Mat<T>* z_out) {
    const int B = X.rows, d = m.d, n = m.n;
    if (X.cols != d) throw DomainError("activation width disagrees with sae");
    if (B < 1) throw DomainError("empty batch");

    // pre-activations and code
    Mat<T> pre;
    gemm_nt(X, m.w_enc, pre);  // B×n
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        T* p = pre.row(b);
        for (int i = 0; i < n; ++i) p[i] += m.b_enc[i];
    }
    Mat<T> z(B, n);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        const T* p = pre.row(b);
        T* zr = z.row(b);
        for (int i = 0; i < n; ++i) zr[i] = p[i] > m.theta[i] ? p[i] : T(0);
    }

    // reconstruction and residual
    Mat<T> r;  // x̂ − x
    gemm_nt(z, m.w_dec, r);  // B×d
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        T* rr = r.row(b);
        const T* x = X.row(b);
        for (int j = 0; j < d; ++j) rr[j] += m.b_dec[j] - x[j];
    }

    SaeStepMetrics metrics;
    {
        KahanSum recon, l0, pen;
        const bool tanh_mode = cfg.penalty == SparsityPenalty::tanh_weighted;
        for (int b = 0; b < B; ++b) {
            const T* rr = r.row(b);
            double s = 0.0;
            for (int j = 0; j < d; ++j)
                s += static_cast<double>(rr[j]) * static_cast<double>(rr[j]);
            recon.add(s);
            const T* zr = z.row(b);
            double cnt = 0.0, psum = 0.0;
            for (int i = 0; i < n; ++i) {
                if (zr[i] != T(0)) {
                    cnt += 1.0;
                    if (tanh_mode) psum += std::tanh(static_cast<double>(zr[i]));
                }
            }
            l0.add(cnt);
            pen.add(tanh_mode ? psum : cnt);
        }
        metrics.recon = recon.value() / B;
        metrics.mean_l0 = l0.value() / B;
        metrics.sparsity = cfg.lambda * pen.value() / B;
        metrics.loss = metrics.recon + metrics.sparsity;
    }

    // dZ = ∂L/∂z: recon path (2/B)·r·W_dec, plus the tanh penalty term on
    // active features when that mode is selected
    Mat<T> dz;
    gemm_nn(r, m.w_dec, dz);  // B×n
    const T scale = static_cast<T>(2.0 / B);
    const T lam_b = static_cast<T>(cfg.lambda / B);
    const bool tanh_mode = cfg.penalty == SparsityPenalty::tanh_weighted;
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        T* dzr = dz.row(b);
        const T* zr = z.row(b);
        for (int i = 0; i < n; ++i) {
            dzr[i] *= scale;
            if (tanh_mode && zr[i] != T(0)) {
                const T th = static_cast<T>(std::tanh(static_cast<double>(zr[i])));
                dzr[i] += lam_b * (T(1) - th * th);
            }
        }
    }

    // θ pseudo-gradients: rectangle kernel K = 1[|pre−θ| <= ε/2];
    // dθ = Σ_b dz·(−θ/ε)·K  [+ L0 mode: −λ/(B·ε)·K]
    const T eps = static_cast<T>(cfg.bandwidth);
    const T half = eps / T(2);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const T th = m.theta[i];
        for (int b = 0; b < B; ++b) {
            const T u = pre.at(b, i) - th;
            if (u >= -half && u <= half) {
                acc += static_cast<double>(dz.at(b, i)) * (-static_cast<double>(th) / eps);
                if (!tanh_mode) acc -= static_cast<double>(lam_b) / static_cast<double>(eps);
            }
        }
        grads.theta[i] = static_cast<T>(acc);
    }

    // mask dPRE to active features, then the exact paths
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        T* dzr = dz.row(b);
        const T* zr = z.row(b);
        for (int i = 0; i < n; ++i) {
            if (zr[i] == T(0)) dzr[i] = T(0);
        }
    }
    gemm_tn(dz, X, grads.w_enc);  // n×d
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int b = 0; b < B; ++b) acc += static_cast<double>(dz.at(b, i));
        grads.b_enc[i] = static_cast<T>(acc);
    }
    gemm_tn(r, z, grads.w_dec);  // d×n
#pragma omp parallel for schedule(static)
    for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int b = 0; b < B; ++b) acc += static_cast<double>(r.at(b, j));
        grads.b_dec[j] = static_cast<T>(acc * 2.0 / B);
        T* wd = grads.w_dec.row(j);
        for (int i = 0; i < n; ++i) wd[i] *= scale;
    }

    if (z_out) *z_out = std::move(z);
    return metrics;
}

template <class T>
SaeStepMetrics sae_train_step(SaeModel<T>& m, const Mat<T>& X, const SaeTrainConfig& cfg,
                              SaeAdam<T>& adam, FiringLog* log) {
    auto grads = SaeModel<T>::zeros(m.d, m.n);
    Mat<T> z;
    const auto metrics = sae_gradients(m, X, cfg, grads, &z);
    if (!std::isfinite(metrics.loss)) {
        throw DomainError("non-finite sae loss (recon=" + io::fmt_g(metrics.recon) +
                          ", sparsity=" + io::fmt_g(metrics.sparsity) + ")");
    }

    if (log) {
        std::vector<std::uint32_t> fired;
        for (int i = 0; i < m.n; ++i) {
            bool hit = false;
            for (int b = 0; b < X.rows && !hit; ++b) hit = z.at(b, i) != T(0);
            if (hit) fired.push_back(static_cast<std::uint32_t>(i));
        }
        log->record_step(fired);
    }

    adam.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.t));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T ob1 = static_cast<T>(1.0 - cfg.beta1), ob2 = static_cast<T>(1.0 - cfg.beta2);
    const T ibc1 = static_cast<T>(1.0 / bc1), ibc2 = static_cast<T>(1.0 / bc2);
    const T eps = static_cast<T>(cfg.adam_eps);
    const T lr = static_cast<T>(cfg.lr);

    struct Span {
        T* p;
        T* g;
        std::size_t len;
    };
    std::vector<Span> spans;
    {
        std::vector<std::pair<T*, std::size_t>> ps, gs;
        m.for_each_param([&](const std::string&, T* p, std::size_t len) { ps.push_back({p, len}); });
        grads.for_each_param(
            [&](const std::string&, T* g, std::size_t len) { gs.push_back({g, len}); });
        for (std::size_t i = 0; i < ps.size(); ++i) spans.push_back({ps[i].first, gs[i].first, ps[i].second});
    }
    std::size_t off = 0;
    for (const auto& s : spans) {
        T* mm = adam.m.data() + off;
        T* vv = adam.v.data() + off;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(s.len); ++j) {
            mm[j] = b1 * mm[j] + ob1 * s.g[j];
            vv[j] = b2 * vv[j] + ob2 * s.g[j] * s.g[j];
            const T mhat = mm[j] * ibc1;
            const T vhat = vv[j] * ibc2;
            s.p[j] -= lr * (mhat / (std::sqrt(vhat) + eps));
        }
        off += s.len;
    }

    for (auto& th : m.theta) {
        if (th < T(0)) th = T(0);
    }
    m.normalize_decoder();
    return metrics;
}

template <class T>
std::vector<bool> fired_mask(const SaeModel<T>& m, const Mat<T>& X) {
    std::vector<bool> mask(m.n, false);
    const int chunk = 4096;
    Mat<T> pre;
    Mat<T> slab;
    for (int start = 0; start < X.rows; start += chunk) {
        const int rows = std::min(chunk, X.rows - start);
        slab.ensure(rows, m.d);
        std::copy(X.row(start), X.row(start) + static_cast<std::size_t>(rows) * m.d,
                  slab.data());
        gemm_nt(slab, m.w_enc, pre);
        for (int b = 0; b < rows; ++b) {
            const T* p = pre.row(b);
            for (int i = 0; i < m.n; ++i) {
                if (!mask[i] && p[i] + m.b_enc[i] > m.theta[i]) mask[i] = true;
            }
        }
    }
    return mask;
}

template <class T>
std::int64_t count_unique_features(const SaeModel<T>& m, const Mat<T>& X) {
    const auto mask = fired_mask(m, X);
    return static_cast<std::int64_t>(std::count(mask.begin(), mask.end(), true));
}

template <class T>
std::vector<std::vector<std::uint32_t>> active_features(const SaeModel<T>& m, const Mat<T>& X) {
    std::vector<std::vector<std::uint32_t>> out(X.rows);
    const int chunk = 4096;
    Mat<T> pre;
    Mat<T> slab;
    for (int start = 0; start < X.rows; start += chunk) {
        const int rows = std::min(chunk, X.rows - start);
        slab.ensure(rows, m.d);
        std::copy(X.row(start), X.row(start) + static_cast<std::size_t>(rows) * m.d,
                  slab.data());
        gemm_nt(slab, m.w_enc, pre);
#pragma omp parallel for schedule(static)
        for (int b = 0; b < rows; ++b) {
            const T* p = pre.row(b);
            auto& ids = out[start + b];
            for (int i = 0; i < m.n; ++i) {
                if (p[i] + m.b_enc[i] > m.theta[i]) ids.push_back(static_cast<std::uint32_t>(i));
            }
        }
    }
    return out;
}

template <class T>
void save_sae_checkpoint(const std::filesystem::path& path, const SaeModel<T>& model,
                         const SaeTrainConfig& cfg, const nlohmann::json& extra_meta) {
    nlohmann::json meta;
    meta["version"] = kVersion;
    meta["dtype"] = dtype_name<T>();
    meta["d"] = model.d;
    meta["n"] = model.n;
    meta["host_layer"] = model.host_layer;
    meta["host_step"] = model.host_step;
    meta["lambda"] = cfg.lambda;
    meta["bandwidth"] = cfg.bandwidth;
    meta["lr"] = cfg.lr;
    meta["batch_size"] = cfg.batch_size;
    meta["dead_window"] = cfg.dead_window;
    meta["theta_init"] = cfg.theta_init;
    meta["penalty"] = cfg.penalty == SparsityPenalty::l0 ? "l0" : "tanh";
    if (!extra_meta.is_null()) meta["run"] = extra_meta;
    io::ContainerWriter w("sae-checkpoint", meta);
    model.for_each_param([&](const std::string& name, const T* p, std::size_t len) {
        add_tensor(w, name, p, len);
    });
    w.write(path);
}

template <class T>
LoadedSae<T> load_sae_checkpoint(const std::filesystem::path& path) {
    const auto c = io::Container::read(path, "sae-checkpoint");
    const auto& meta = c.meta();
    if (meta.value("dtype", "") != dtype_name<T>()) {
        throw DomainError("sae checkpoint dtype mismatch: file holds " +
                          meta.value("dtype", std::string("?")));
    }
    LoadedSae<T> out;
    out.model = SaeModel<T>::zeros(meta.value("d", 0), meta.value("n", 0));
    out.model.host_layer = meta.value("host_layer", 0);
    out.model.host_step = meta.value("host_step", std::int64_t{0});
    out.model.for_each_param([&](const std::string& name, T* p, std::size_t len) {
        auto v = read_tensor<T>(c, name);
        if (v.size() != len) throw DomainError("sae checkpoint tensor size mismatch: " + name);
        std::copy(v.begin(), v.end(), p);
    });
    out.cfg.lambda = meta.value("lambda", 4.0);
    out.cfg.bandwidth = meta.value("bandwidth", 0.02);
    out.cfg.lr = meta.value("lr", 1e-3);
    out.cfg.batch_size = meta.value("batch_size", 1024);
    out.cfg.dead_window = meta.value("dead_window", 1000);
    out.cfg.theta_init = meta.value("theta_init", 0.01);
    out.cfg.penalty =
        meta.value("penalty", "l0") == std::string("tanh") ? SparsityPenalty::tanh_weighted
                                                           : SparsityPenalty::l0;
    return out;
}

void write_feature_report(const std::filesystem::path& path,
                          const std::vector<FeatureCountRow>& rows,
                          const std::vector<std::string>& comments) {
    io::CsvWriter w({"checkpoint_step", "lambda", "recon_score", "unique_features",
                     "dead_features"});
    for (const auto& c : comments) w.comment(c);
    for (const auto& r : rows) {
        w.row({io::fmt_int(r.checkpoint_step), io::fmt_g(r.lambda), io::fmt_g(r.recon_score),
               io::fmt_int(r.unique_features), io::fmt_int(r.dead_features)});
    }
    w.write(path);
}

std::vector<FeatureCountRow> read_feature_report(const std::filesystem::path& path) {
    const auto t = io::read_csv(path);
    std::vector<FeatureCountRow> out;
    for (const auto& r : t.rows) {
        if (r.size() < 5) throw DomainError("malformed feature report row");
        FeatureCountRow row;
        row.checkpoint_step = std::stoll(r[0]);
        row.lambda = std::stod(r[1]);
        row.recon_score = std::stod(r[2]);
        row.unique_features = std::stoll(r[3]);
        row.dead_features = std::stoll(r[4]);
        out.push_back(row);
    }
    return out;
}

template SaeStepMetrics sae_gradients<float>(const SaeModel<float>&, const Mat<float>&,
                                             const SaeTrainConfig&, SaeModel<float>&,
                                             Mat<float>*);
template SaeStepMetrics sae_gradients<double>(const SaeModel<double>&, const Mat<double>&,
                                              const SaeTrainConfig&, SaeModel<double>&,
                                              Mat<double>*);
template SaeStepMetrics sae_train_step<float>(SaeModel<float>&, const Mat<float>&,
                                              const SaeTrainConfig&, SaeAdam<float>&, FiringLog*);
template SaeStepMetrics sae_train_step<double>(SaeModel<double>&, const Mat<double>&,
                                               const SaeTrainConfig&, SaeAdam<double>&,
                                               FiringLog*);
template std::vector<bool> fired_mask<float>(const SaeModel<float>&, const Mat<float>&);
template std::vector<bool> fired_mask<double>(const SaeModel<double>&, const Mat<double>&);
template std::int64_t count_unique_features<float>(const SaeModel<float>&, const Mat<float>&);
template std::int64_t count_unique_features<double>(const SaeModel<double>&, const Mat<double>&);
template std::vector<std::vector<std::uint32_t>> active_features<float>(const SaeModel<float>&,
                                                                        const Mat<float>&);
template std::vector<std::vector<std::uint32_t>> active_features<double>(const SaeModel<double>&,
                                                                         const Mat<double>&);
template void save_sae_checkpoint<float>(const std::filesystem::path&, const SaeModel<float>&,
                                         const SaeTrainConfig&, const nlohmann::json&);
template void save_sae_checkpoint<double>(const std::filesystem::path&, const SaeModel<double>&,
                                          const SaeTrainConfig&, const nlohmann::json&);
template struct LoadedSae<float>;
template struct LoadedSae<double>;
template LoadedSae<float> load_sae_checkpoint<float>(const std::filesystem::path&);
template LoadedSae<double> load_sae_checkpoint<double>(const std::filesystem::path&);
template struct SaeAdam<float>;
template struct SaeAdam<double>;

}  // namespace ftlab::sae
