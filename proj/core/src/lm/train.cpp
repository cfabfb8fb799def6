#include "ftlab/lm/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ftlab/errors.hpp"
#include "ftlab/io/container.hpp"
#include "ftlab/io/csv.hpp"
#include "ftlab/version.hpp"

namespace ftlab::lm {

namespace {

template <class T>
struct ParamSpan {
    std::string name;
    T* data;
    std::size_t len;
};

template <class T>
std::vector<ParamSpan<T>> spans_of(TransformerModel<T>& m) {
    std::vector<ParamSpan<T>> out;
    m.for_each_param([&](const std::string& name, T* p, std::size_t n) {
        out.push_back({name, p, n});
    });
    return out;
}

bool decays(const std::string& name) {
    // matrices decay; rmsnorm gains do not
    return name.find("g_attn") == std::string::npos && name.find("g_ffn") == std::string::npos &&
           name != "final.g";
}

template <class T>
double grad_norm(TransformerModel<T>& grads) {
    KahanSum s;
    grads.for_each_param([&](const std::string&, T* g, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i)
            s.add(static_cast<double>(g[i]) * static_cast<double>(g[i]));
    });
    return std::sqrt(s.value());
}

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

template <class T>
TraceEntry train_step(TransformerModel<T>& model, const std::vector<std::vector<TokenId>>& windows,
                      AdamState<T>& adam, const TrainConfig& tc, std::int64_t step,
                      const corpus::FunctionTokenSet& fset, TransformerModel<T>& grads,
                      ForwardCache<T>& cache) {
    const int B = static_cast<int>(windows.size());
    if (B < 1) throw DomainError("empty batch");
    const int L = static_cast<int>(windows[0].size()) - 1;
    if (L < 1) throw DomainError("windows need at least two tokens");

    std::vector<std::vector<TokenId>> inputs(B);
    std::vector<TokenId> targets(static_cast<std::size_t>(B) * L);
    for (int s = 0; s < B; ++s) {
        if (static_cast<int>(windows[s].size()) != L + 1) throw DomainError("ragged batch");
        inputs[s].assign(windows[s].begin(), windows[s].end() - 1);
        for (int p = 0; p < L; ++p) targets[static_cast<std::size_t>(s) * L + p] = windows[s][p + 1];
    }

    forward(model, inputs, cache);
    std::vector<double> per_row;
    const double loss = softmax_xent(cache.logits, targets, &per_row, true);
    const double lr = lr_at(step, tc);

    TraceEntry e;
    e.step = step;
    e.lr = lr;
    e.loss_all = loss;
    std::array<KahanSum, 4> acc{};
    std::array<double, 4> lo{}, hi{};
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (int s = 0; s < B; ++s) {
        for (int p = 0; p < L; ++p) {
            const std::size_t r = static_cast<std::size_t>(s) * L + p;
            const auto g = static_cast<int>(classify_transition(
                fset.contains(windows[s][p]), fset.contains(windows[s][p + 1])));
            acc[g].add(per_row[r]);
            lo[g] = std::min(lo[g], per_row[r]);
            hi[g] = std::max(hi[g], per_row[r]);
            e.group_count[g] += 1;
        }
    }
    for (int g = 0; g < 4; ++g) {
        // the mean of identical values is that value; the shortcut keeps the
        // uniform-logit cold start at ln(vocab) without a rounding wobble
        e.group_loss[g] = e.group_count[g] == 0 ? 0.0
                          : lo[g] == hi[g]     ? lo[g]
                                               : acc[g].value() / e.group_count[g];
    }

    grads.zero_params();
    backward(model, cache, cache.logits, grads);

    if (!std::isfinite(loss)) {
        throw DomainError("non-finite loss at step " + std::to_string(step) +
                          " (lr=" + io::fmt_g(lr) + ", grad_norm=" + io::fmt_g(grad_norm(grads)) +
                          ")");
    }

    adam.t += 1;
    const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(adam.t));
    const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(adam.t));
    const T b1 = static_cast<T>(tc.beta1), b2 = static_cast<T>(tc.beta2);
    const T ob1 = static_cast<T>(1.0 - tc.beta1), ob2 = static_cast<T>(1.0 - tc.beta2);
    const T ibc1 = static_cast<T>(1.0 / bc1), ibc2 = static_cast<T>(1.0 / bc2);
    const T eps = static_cast<T>(tc.adam_eps);
    const T tlr = static_cast<T>(lr);
    const T twd = static_cast<T>(tc.weight_decay);

    auto pspans = spans_of(model);
    auto gspans = spans_of(grads);
    std::size_t off = 0;
    for (std::size_t i = 0; i < pspans.size(); ++i) {
        T* p = pspans[i].data;
        T* g = gspans[i].data;
        T* mm = adam.m.data() + off;
        T* vv = adam.v.data() + off;
        const std::size_t n = pspans[i].len;
        const bool wd = decays(pspans[i].name);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n); ++j) {
            mm[j] = b1 * mm[j] + ob1 * g[j];
            vv[j] = b2 * vv[j] + ob2 * g[j] * g[j];
            const T mhat = mm[j] * ibc1;
            const T vhat = vv[j] * ibc2;
            T upd = mhat / (std::sqrt(vhat) + eps);
            if (wd) upd += twd * p[j];
            p[j] -= tlr * upd;
        }
        off += n;
    }
    return e;
}

std::vector<std::vector<TokenId>> next_windows(const std::vector<TokenId>& stream, int batch_size,
                                               int seq_len, std::int64_t& cursor) {
    const std::int64_t N = static_cast<std::int64_t>(stream.size());
    const std::int64_t W = static_cast<std::int64_t>(seq_len) + 1;
    if (N < W) throw DomainError("token stream smaller than one training window");
    const std::int64_t usable = N - seq_len;  // valid window starts: [0, N-W]
    std::vector<std::vector<TokenId>> windows(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        const std::int64_t s = (cursor + static_cast<std::int64_t>(i) * W) % usable;
        windows[i].assign(stream.begin() + s, stream.begin() + s + W);
    }
    cursor = (cursor + static_cast<std::int64_t>(batch_size) * W) % usable;
    return windows;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceEntry>& trace,
                     const std::vector<std::string>& comments) {
    io::CsvWriter w({"step", "lr", "loss_all", "loss_FF", "loss_FC", "loss_CF", "loss_CC",
                     "count_FF", "count_FC", "count_CF", "count_CC"});
    for (const auto& c : comments) w.comment(c);
    for (const auto& e : trace) {
        w.row({io::fmt_int(e.step), io::fmt_g(e.lr), io::fmt_g(e.loss_all),
               io::fmt_g(e.group_loss[0]), io::fmt_g(e.group_loss[1]), io::fmt_g(e.group_loss[2]),
               io::fmt_g(e.group_loss[3]), io::fmt_int(e.group_count[0]),
               io::fmt_int(e.group_count[1]), io::fmt_int(e.group_count[2]),
               io::fmt_int(e.group_count[3])});
    }
    w.write(path);
}

std::vector<TraceEntry> read_trace_csv(const std::filesystem::path& path) {
    const auto t = io::read_csv(path);
    std::vector<TraceEntry> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        if (r.size() < 11) throw DomainError("malformed trace row");
        TraceEntry e;
        e.step = std::stoll(r[0]);
        e.lr = std::stod(r[1]);
        e.loss_all = std::stod(r[2]);
        for (int g = 0; g < 4; ++g) {
            e.group_loss[g] = std::stod(r[3 + g]);
            e.group_count[g] = std::stoll(r[7 + g]);
        }
        out.push_back(e);
    }
    return out;
}

template <class T>
void save_model_checkpoint(const std::filesystem::path& path, const TransformerModel<T>& model,
                           const AdamState<T>& adam, std::int64_t step, std::int64_t cursor,
                           std::uint64_t seed, const std::string& rng_state,
                           const TrainConfig& tc, const nlohmann::json& extra_meta) {
    nlohmann::json meta;
    meta["version"] = kVersion;
    meta["dtype"] = dtype_name<T>();
    meta["step"] = step;
    meta["cursor"] = cursor;
    meta["seed"] = seed;
    meta["adam_t"] = adam.t;
    meta["rng"] = rng_state;
    meta["config"] = model.cfg.to_json();
    meta["train"] = tc.to_json();
    if (!extra_meta.is_null()) meta["run"] = extra_meta;
    io::ContainerWriter w("lm-checkpoint", meta);
    model.for_each_param([&](const std::string& name, const T* p, std::size_t n) {
        add_tensor(w, name, p, n);
    });
    add_tensor(w, "adam.m", adam.m.data(), adam.m.size());
    add_tensor(w, "adam.v", adam.v.data(), adam.v.size());
    w.write(path);
}

template <class T>
LoadedCheckpoint<T> load_model_checkpoint(const std::filesystem::path& path) {
    const auto c = io::Container::read(path, "lm-checkpoint");
    const auto& meta = c.meta();
    if (meta.value("dtype", "") != dtype_name<T>()) {
        throw DomainError("checkpoint dtype mismatch: file holds " +
                          meta.value("dtype", std::string("?")));
    }
    LoadedCheckpoint<T> out;
    const auto cfg = TransformerConfig::from_json(meta.at("config"));
    out.model = TransformerModel<T>::zeros_like(cfg);
    out.model.for_each_param([&](const std::string& name, T* p, std::size_t n) {
        auto v = read_tensor<T>(c, name);
        if (v.size() != n) throw DomainError("checkpoint tensor size mismatch: " + name);
        std::copy(v.begin(), v.end(), p);
    });
    out.adam.m = read_tensor<T>(c, "adam.m");
    out.adam.v = read_tensor<T>(c, "adam.v");
    out.adam.t = meta.value("adam_t", std::int64_t{0});
    out.train = TrainConfig::from_json(meta.at("train"));
    out.step = meta.value("step", std::int64_t{0});
    out.cursor = meta.value("cursor", std::int64_t{0});
    out.seed = meta.value("seed", std::uint64_t{0});
    out.rng_state = meta.value("rng", std::string());
    return out;
}

template <class T>
Trainer<T>::Trainer(const TransformerConfig& mc, const TrainConfig& tc,
                    std::vector<TokenId> stream, corpus::FunctionTokenSet fset,
                    std::uint64_t seed)
    : mc_(mc),
      tc_(tc),
      model_(TransformerModel<T>::init(mc, seed)),
      adam_(AdamState<T>::template like<TransformerModel<T>>(model_)),
      grads_(TransformerModel<T>::zeros_like(mc)),
      stream_(std::move(stream)),
      fset_(std::move(fset)),
      seed_(seed),
      rng_(Rng::substream(seed, "train")) {
    mc_.validate();
    tc_.validate();
    if (static_cast<std::int64_t>(stream_.size()) < tc_.seq_len + 1) {
        throw DomainError("token stream smaller than one training window");
    }
}

template <class T>
TraceEntry Trainer<T>::step_once() {
    auto windows = next_windows(stream_, tc_.batch_size, tc_.seq_len, cursor_);
    auto e = train_step(model_, windows, adam_, tc_, step_ + 1, fset_, grads_, cache_);
    step_ += 1;
    return e;
}

template <class T>
void Trainer<T>::save_checkpoint(const std::filesystem::path& path,
                                 const nlohmann::json& extra_meta) const {
    save_model_checkpoint(path, model_, adam_, step_, cursor_, seed_, rng_.serialize(), tc_,
                          extra_meta);
}

template <class T>
Trainer<T> Trainer<T>::load_checkpoint(const std::filesystem::path& path,
                                       std::vector<TokenId> stream,
                                       corpus::FunctionTokenSet fset) {
    auto ck = load_model_checkpoint<T>(path);
    Trainer<T> t;
    t.mc_ = ck.model.cfg;
    t.tc_ = ck.train;
    t.model_ = std::move(ck.model);
    t.adam_ = std::move(ck.adam);
    t.grads_ = TransformerModel<T>::zeros_like(t.mc_);
    t.stream_ = std::move(stream);
    t.fset_ = std::move(fset);
    t.step_ = ck.step;
    t.cursor_ = ck.cursor;
    t.seed_ = ck.seed;
    if (!ck.rng_state.empty()) t.rng_.deserialize(ck.rng_state);
    if (static_cast<std::int64_t>(t.stream_.size()) < t.tc_.seq_len + 1) {
        throw DomainError("token stream smaller than one training window");
    }
    return t;
}

template struct AdamState<float>;
template struct AdamState<double>;
template TraceEntry train_step<float>(TransformerModel<float>&,
                                      const std::vector<std::vector<TokenId>>&, AdamState<float>&,
                                      const TrainConfig&, std::int64_t,
                                      const corpus::FunctionTokenSet&, TransformerModel<float>&,
                                      ForwardCache<float>&);
template TraceEntry train_step<double>(TransformerModel<double>&,
                                       const std::vector<std::vector<TokenId>>&,
                                       AdamState<double>&, const TrainConfig&, std::int64_t,
                                       const corpus::FunctionTokenSet&, TransformerModel<double>&,
                                       ForwardCache<double>&);
template void save_model_checkpoint<float>(const std::filesystem::path&,
                                           const TransformerModel<float>&, const AdamState<float>&,
                                           std::int64_t, std::int64_t, std::uint64_t,
                                           const std::string&, const TrainConfig&,
                                           const nlohmann::json&);
template void save_model_checkpoint<double>(const std::filesystem::path&,
                                            const TransformerModel<double>&,
                                            const AdamState<double>&, std::int64_t, std::int64_t,
                                            std::uint64_t, const std::string&, const TrainConfig&,
                                            const nlohmann::json&);
template LoadedCheckpoint<float> load_model_checkpoint<float>(const std::filesystem::path&);
template LoadedCheckpoint<double> load_model_checkpoint<double>(const std::filesystem::path&);
template class Trainer<float>;
template class Trainer<double>;

}  // namespace ftlab::lm
