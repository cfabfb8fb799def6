#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "ftlab/errors.hpp"
#include "ftlab/io/container.hpp"
#include "ftlab/lm/model.hpp"
#include "ftlab/lm/train.hpp"
#include "ftlab/rng.hpp"
#include "ftlab/sae/model.hpp"
#include "ftlab/sae/score.hpp"
#include "ftlab/sae/train.hpp"
#include "tmpdir.hpp"

using namespace ftlab;
using namespace ftlab::sae;
using ftlab::test::TmpDir;

namespace {

// W_dec = [I, -I], W_enc = W_decᵀ, zero biases and thresholds: encode/decode
// reproduce any x bitwise (positive parts on features 0..d-1, negative parts
// on d..2d-1).
template <class T>
SaeModel<T> identity_sae(int d) {
    auto m = SaeModel<T>::zeros(d, 2 * d);
    for (int i = 0; i < d; ++i) {
        m.w_dec.at(i, i) = T(1);
        m.w_dec.at(i, d + i) = T(-1);
        m.w_enc.at(i, i) = T(1);
        m.w_enc.at(d + i, i) = T(-1);
    }
    return m;
}

template <class T>
Mat<T> random_batch(int rows, int d, std::uint64_t seed) {
    Rng rng(seed);
    Mat<T> x(rows, d);
    for (auto& v : x.a) v = static_cast<T>(rng.normal());
    return x;
}

// x rows lie in a fixed rank-4 subspace of R^d
template <class T>
Mat<T> rank4_batch(int rows, int d, std::uint64_t seed) {
    Rng rng(seed);
    Mat<T> basis(4, d);
    for (auto& v : basis.a) v = static_cast<T>(rng.normal());
    Mat<T> x(rows, d);
    for (int r = 0; r < rows; ++r) {
        double u[4];
        for (auto& c : u) c = rng.normal();
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += u[k] * static_cast<double>(basis.at(k, j));
            x.at(r, j) = static_cast<T>(s);
        }
    }
    return x;
}

}  // namespace

TEST_CASE("jumprelu thresholding") {
    std::vector<double> pre{0.5, 0.2, 0.3, -0.1, 1.0};
    std::vector<double> theta{0.3, 0.3, 0.3, 0.0, 0.0};
    auto z = jumprelu(pre, theta);
    CHECK(z[0] == 0.5);   // above threshold passes unchanged
    CHECK(z[1] == 0.0);   // below threshold
    CHECK(z[2] == 0.0);   // exactly at threshold: strict inequality
    CHECK(z[3] == 0.0);   // theta=0 still kills non-positives
    CHECK(z[4] == 1.0);   // theta=0 on positive input = relu
}

TEST_CASE("encode and decode") {
    auto m = identity_sae<double>(3);
    double x[3] = {0.7, -0.2, 0.0};
    auto code = sae_encode(m, x);
    REQUIRE(code.size() == 2);
    CHECK(code.ids[0] == 0);
    CHECK(code.c[0] == 0.7);
    CHECK(code.ids[1] == 4);  // negative part of coordinate 1
    CHECK(code.c[1] == 0.2);

    auto xhat = sae_decode(m, code);
    CHECK(xhat[0] == 0.7);
    CHECK(xhat[1] == -0.2);
    CHECK(xhat[2] == 0.0);

    SUBCASE("empty code decodes to the decoder bias") {
        m.b_dec = {1.0, 2.0, 3.0};
        SparseCode<double> empty;
        auto y = sae_decode(m, empty);
        CHECK(y == m.b_dec);
    }
    SUBCASE("feature id past the dictionary is rejected") {
        SparseCode<double> bad;
        bad.ids = {6};
        bad.c = {1.0};
        CHECK_THROWS_WITH_AS(sae_decode(m, bad), doctest::Contains("out of range"), DomainError);
    }
}

TEST_CASE("dense and sparse reconstruction agree") {
    Rng rng(11);
    const int d = 8, n = 32;
    auto m = SaeModel<double>::init(d, n, 5, 0.05);
    for (auto& b : m.b_enc) b = rng.normal() * 0.1;
    for (auto& b : m.b_dec) b = rng.normal() * 0.1;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(d);
        for (auto& v : x) v = rng.normal();
        auto dense = sae_reconstruct(m, x.data());
        auto sparse = sae_decode(m, sae_encode(m, x.data()));
        for (int j = 0; j < d; ++j) CHECK(std::abs(dense[j] - sparse[j]) < 1e-12);
    }
}

TEST_CASE("loss arithmetic") {
    // three active features, ‖x − x̂‖² = 0.5 exactly, λ = 2 → 0.5 + 2·3
    auto m = SaeModel<double>::zeros(2, 4);
    m.w_enc.at(0, 0) = 1.0;
    m.w_enc.at(1, 1) = 1.0;
    m.w_enc.at(2, 0) = 1.0;
    m.w_enc.at(2, 1) = 1.0;
    m.w_enc.at(3, 0) = -1.0;
    m.w_enc.at(3, 1) = -1.0;
    m.w_dec.at(0, 0) = 1.0;
    m.w_dec.at(1, 1) = 1.0;
    m.w_dec.at(0, 2) = -0.25;
    m.w_dec.at(1, 2) = -0.25;
    double x[2] = {1.0, 1.0};
    // code: (0,1), (1,1), (2,2) → x̂ = (1,1) + 2·(-0.25,-0.25) = (0.5, 0.5)
    auto loss = sae_loss(m, x, 2.0);
    CHECK(loss.recon == 0.5);
    CHECK(loss.sparsity == 6.0);
    CHECK(loss.total == 6.5);

    SUBCASE("lambda zero leaves only reconstruction") {
        auto l0 = sae_loss(m, x, 0.0);
        CHECK(l0.sparsity == 0.0);
        CHECK(l0.total == 0.5);
    }
}

TEST_CASE("gradient check on non-threshold parameters") {
    const int d = 6, n = 12, B = 5;
    SaeTrainConfig cfg;
    cfg.lambda = 1.5;
    cfg.bandwidth = 1e-9;  // keep the kernel window away from the fd probes

    for (auto penalty : {SparsityPenalty::l0, SparsityPenalty::tanh_weighted}) {
        cfg.penalty = penalty;
        auto m = SaeModel<double>::init(d, n, 21, 0.15);
        Rng rng(22);
        for (auto& b : m.b_enc) b = rng.normal() * 0.2;
        for (auto& b : m.b_dec) b = rng.normal() * 0.2;
        auto X = random_batch<double>(B, d, 23);

        auto grads = SaeModel<double>::zeros(d, n);
        sae_gradients(m, X, cfg, grads);

        const double h = 1e-6;
        double max_rel = 0.0;
        const std::vector<std::string> names{"w_enc", "b_enc", "w_dec", "b_dec"};
        m.for_each_param([&](const std::string& name, double* p, std::size_t len) {
            if (name == "theta") return;
            double* g = nullptr;
            grads.for_each_param([&](const std::string& gn, double* gp, std::size_t) {
                if (gn == name) g = gp;
            });
            // probe a spread of entries per tensor
            const std::size_t stride = std::max<std::size_t>(1, len / 17);
            for (std::size_t i = 0; i < len; i += stride) {
                const double keep = p[i];
                auto probe = SaeModel<double>::zeros(d, n);
                p[i] = keep + h;
                const double up = sae_gradients(m, X, cfg, probe).loss;
                p[i] = keep - h;
                const double dn = sae_gradients(m, X, cfg, probe).loss;
                p[i] = keep;
                const double fd = (up - dn) / (2 * h);
                const double rel = std::abs(fd - g[i]) / std::max(1e-6, std::abs(fd) + std::abs(g[i]));
                max_rel = std::max(max_rel, rel);
            }
        });
        CHECK(max_rel < 1e-4);
    }
}

TEST_CASE("lambda-zero training drives reconstruction down on low-rank data") {
    const int d = 16, n = 32;
    auto X = rank4_batch<double>(1000, d, 31);
    auto m = SaeModel<double>::init(d, n, 32, 0.0);
    SaeTrainConfig cfg;
    cfg.lambda = 0.0;
    cfg.lr = 3e-3;
    cfg.batch_size = 100;
    auto adam = SaeAdam<double>::like(m);

    Mat<double> batch(cfg.batch_size, d);
    auto fill = [&](int step) {
        for (int b = 0; b < cfg.batch_size; ++b) {
            const int src = (step * cfg.batch_size + b) % X.rows;
            std::copy(X.row(src), X.row(src) + d, batch.row(b));
        }
    };
    fill(0);
    auto grads = SaeModel<double>::zeros(d, n);
    const double initial_recon = sae_gradients(m, batch, cfg, grads).recon;

    double final_recon = initial_recon;
    for (int step = 0; step < 1500; ++step) {
        fill(step);
        final_recon = sae_train_step(m, batch, cfg, adam, nullptr).recon;
    }
    CHECK(final_recon < 0.01 * initial_recon);
}

TEST_CASE("training step invariants and determinism") {
    const int d = 8, n = 16;
    SaeTrainConfig cfg;
    cfg.lambda = 0.5;
    auto X = random_batch<double>(32, d, 41);

    SUBCASE("theta stays nonnegative and decoder columns stay unit") {
        auto m = SaeModel<double>::init(d, n, 42, 0.01);
        auto adam = SaeAdam<double>::like(m);
        for (int s = 0; s < 25; ++s) sae_train_step(m, X, cfg, adam, nullptr);
        for (auto th : m.theta) CHECK(th >= 0.0);
        for (int i = 0; i < n; ++i) {
            double norm = 0.0;
            for (int j = 0; j < d; ++j) norm += m.w_dec.at(j, i) * m.w_dec.at(j, i);
            CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-12);
        }
    }

    SUBCASE("identical runs produce identical parameters") {
        auto run = [&](int threads) {
            set_num_threads(threads);
            auto m = SaeModel<double>::init(d, n, 42, 0.01);
            auto adam = SaeAdam<double>::like(m);
            FiringLog log(n);
            for (int s = 0; s < 10; ++s) sae_train_step(m, X, cfg, adam, &log);
            set_num_threads(0);
            return m;
        };
        auto a = run(1);
        auto b = run(4);
        CHECK(a.w_enc.a == b.w_enc.a);
        CHECK(a.w_dec.a == b.w_dec.a);
        CHECK(a.b_enc == b.b_enc);
        CHECK(a.b_dec == b.b_dec);
        CHECK(a.theta == b.theta);
    }

    SUBCASE("non-finite loss aborts") {
        auto m = SaeModel<double>::init(d, n, 42, 0.01);
        m.b_dec[0] = std::numeric_limits<double>::quiet_NaN();
        auto adam = SaeAdam<double>::like(m);
        CHECK_THROWS_WITH_AS(sae_train_step(m, X, cfg, adam, nullptr),
                             doctest::Contains("non-finite"), DomainError);
    }
}

TEST_CASE("dead feature detection") {
    SUBCASE("window boundary") {
        FiringLog log(3);
        log.record_step({0, 1, 2});  // step 1
        log.record_step({0, 1});     // step 2
        log.record_step({0});        // 3
        log.record_step({0});        // 4
        log.record_step({0});        // 5
        log.record_step({0});        // 6
        // window 5 covers steps 2..6: feature 1 fired at exactly the oldest
        // step inside the window, feature 2 one step earlier
        auto dead = detect_dead_features(log, 5);
        CHECK(dead == std::vector<std::uint32_t>{2});
        dead = detect_dead_features(log, 4);
        CHECK(dead == std::vector<std::uint32_t>{1, 2});
    }

    SUBCASE("log shorter than the window is rejected") {
        FiringLog log(2);
        log.record_step({0});
        CHECK_THROWS_AS(detect_dead_features(log, 2), DomainError);
    }

    SUBCASE("matches a direct scan of per-step firing sets") {
        Rng rng(55);
        const int n = 12, steps = 9, window = 4;
        FiringLog log(n);
        std::vector<std::set<std::uint32_t>> sets;
        for (int s = 0; s < steps; ++s) {
            std::vector<std::uint32_t> fired;
            std::set<std::uint32_t> fs;
            for (int f = 0; f < n; ++f) {
                if (rng.uniform() < 0.25) {
                    fired.push_back(f);
                    fs.insert(f);
                }
            }
            log.record_step(fired);
            sets.push_back(fs);
        }
        std::vector<std::uint32_t> brute;
        for (int f = 0; f < n; ++f) {
            bool seen = false;
            for (int s = steps - window; s < steps; ++s) seen = seen || sets[s].count(f) > 0;
            if (!seen) brute.push_back(f);
        }
        CHECK(detect_dead_features(log, window) == brute);
    }
}

TEST_CASE("firing log agrees with the pre-step fired mask") {
    const int d = 8, n = 16;
    auto m = SaeModel<double>::init(d, n, 71, 0.02);
    auto adam = SaeAdam<double>::like(m);
    SaeTrainConfig cfg;
    FiringLog log(n);
    auto X = random_batch<double>(16, d, 72);
    for (int s = 0; s < 3; ++s) {
        auto mask = fired_mask(m, X);
        sae_train_step(m, X, cfg, adam, &log);
        for (int f = 0; f < n; ++f) {
            if (mask[f]) CHECK(log.last_fired[f] == s + 1);
        }
    }
}

TEST_CASE("unique feature counting") {
    SUBCASE("huge thresholds silence everything") {
        auto m = identity_sae<double>(4);
        for (auto& th : m.theta) th = 1e30;
        auto X = random_batch<double>(50, 4, 61);
        CHECK(count_unique_features(m, X) == 0);
    }

    SUBCASE("identity code on basis vectors") {
        auto m = identity_sae<double>(4);
        Mat<double> X(3, 4);
        X.at(0, 0) = 1.0;
        X.at(1, 1) = 1.0;
        X.at(2, 2) = 1.0;
        CHECK(count_unique_features(m, X) == 3);
    }

    SUBCASE("monotone in the sample and consistent with per-row encoding") {
        const int d = 4, n = 8, rows = 5000;  // several encoder chunks
        auto m = SaeModel<double>::init(d, n, 62, 0.3);
        auto X = random_batch<double>(rows, d, 63);

        std::vector<bool> brute(n, false);
        std::int64_t prev = 0;
        for (int r = 0; r < rows; ++r) {
            auto code = sae_encode(m, X.row(r));
            for (auto id : code.ids) brute[id] = true;
        }
        CHECK(fired_mask(m, X) == brute);

        for (int cut : {1, 100, 2500, rows}) {
            Mat<double> head(cut, d);
            std::copy(X.data(), X.data() + static_cast<std::size_t>(cut) * d, head.data());
            const auto c = count_unique_features(m, head);
            CHECK(c >= prev);
            prev = c;
        }
        CHECK(prev == std::count(brute.begin(), brute.end(), true));

        auto rows_active = active_features(m, X);
        for (int r = 0; r < 40; ++r) {
            auto code = sae_encode(m, X.row(r));
            CHECK(rows_active[r] == code.ids);
        }
    }
}

TEST_CASE("reconstruction score endpoints") {
    lm::TransformerConfig mc;
    mc.n_layers = 2;
    mc.d_model = 8;
    mc.d_ffn = 16;
    mc.n_heads = 2;
    mc.vocab_size = 16;
    mc.max_seq_len = 8;
    mc.tie_embeddings = true;
    mc.validate();
    auto model = lm::TransformerModel<double>::init(mc, 7);

    std::vector<std::vector<corpus::TokenId>> windows{{1, 5, 3, 9, 2, 11, 4, 6},
                                                      {2, 8, 1, 14, 7, 3, 10, 5}};

    SUBCASE("a perfect dictionary scores exactly one") {
        auto sae = identity_sae<double>(mc.d_model);
        sae.host_layer = 0;
        auto rs = reconstruction_score(model, sae, windows);
        CHECK(rs.score == 1.0);
        CHECK(rs.h_star == rs.h_orig);
        CHECK(rs.warning.empty());
    }

    SUBCASE("a silent dictionary scores exactly zero") {
        auto sae = identity_sae<double>(mc.d_model);
        sae.host_layer = 0;
        for (auto& th : sae.theta) th = 1e30;
        auto rs = reconstruction_score(model, sae, windows);
        CHECK(rs.score == 0.0);
        CHECK(rs.h_star == rs.h_zero);
    }

    SUBCASE("score is undefined when ablation does not move the loss") {
        // untied init keeps the unembedding at zero, so every tap produces
        // identical (all-zero) logits
        auto mc2 = mc;
        mc2.tie_embeddings = false;
        auto zero_head = lm::TransformerModel<double>::init(mc2, 7);
        auto sae = identity_sae<double>(mc.d_model);
        sae.host_layer = 0;
        CHECK_THROWS_WITH_AS(reconstruction_score(zero_head, sae, windows),
                             doctest::Contains("undefined"), DomainError);
    }

    SUBCASE("mismatched widths are config errors") {
        auto sae = identity_sae<double>(4);
        sae.host_layer = 0;
        CHECK_THROWS_AS(reconstruction_score(model, sae, windows), ConfigError);
        auto sae2 = identity_sae<double>(8);
        sae2.host_layer = 5;
        CHECK_THROWS_AS(reconstruction_score(model, sae2, windows), ConfigError);
    }
}

TEST_CASE("sae checkpoint round-trip") {
    TmpDir tmp;
    const auto path = tmp.path / "sae.bin";
    auto m = SaeModel<float>::init(12, 24, 91, 0.03);
    m.host_layer = 2;
    m.host_step = 5000;
    SaeTrainConfig cfg;
    cfg.lambda = 2.5;
    cfg.penalty = SparsityPenalty::tanh_weighted;
    save_sae_checkpoint(path, m, cfg);

    auto loaded = load_sae_checkpoint<float>(path);
    CHECK(loaded.model.d == 12);
    CHECK(loaded.model.n == 24);
    CHECK(loaded.model.host_layer == 2);
    CHECK(loaded.model.host_step == 5000);
    CHECK(loaded.model.w_enc.a == m.w_enc.a);
    CHECK(loaded.model.w_dec.a == m.w_dec.a);
    CHECK(loaded.model.theta == m.theta);
    CHECK(loaded.cfg.lambda == 2.5);
    CHECK(loaded.cfg.penalty == SparsityPenalty::tanh_weighted);

    SUBCASE("save-load-save is byte identical") {
        const auto again = tmp.path / "sae2.bin";
        save_sae_checkpoint(again, loaded.model, loaded.cfg);
        CHECK(io::read_file(path) == io::read_file(again));
    }
    SUBCASE("wrong dtype is rejected") {
        CHECK_THROWS_WITH_AS(load_sae_checkpoint<double>(path), doctest::Contains("dtype"),
                             DomainError);
    }
    SUBCASE("corruption is caught") {
        auto bytes = io::read_file(path);
        bytes[bytes.size() / 2] ^= 0x20;
        io::write_file_atomic(path, bytes.data(), bytes.size());
        CHECK_THROWS_WITH_AS(load_sae_checkpoint<float>(path), doctest::Contains("checksum"),
                             DomainError);
    }
}

TEST_CASE("feature report round-trip") {
    TmpDir tmp;
    const auto path = tmp.path / "features.csv";
    std::vector<FeatureCountRow> rows{{1000, 10.0, 0.84, 120, 3}, {5000, 4.0, 0.91, 260, 1}};
    write_feature_report(path, rows, {"ftlab test"});
    auto back = read_feature_report(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].checkpoint_step == 1000);
    CHECK(back[0].lambda == 10.0);
    CHECK(back[1].unique_features == 260);
    CHECK(back[1].dead_features == 1);
}
