#include <algorithm>
#include <functional>
#include <vector>

#include <doctest.h>

#include "ftlab/corpus/document.hpp"
#include "ftlab/corpus/stats.hpp"
#include "ftlab/corpus/tokenizer.hpp"
#include "ftlab/errors.hpp"
#include "ftlab/io/container.hpp"
#include "ftlab/lm/generate.hpp"
#include "ftlab/steer/steer.hpp"
#include "tmpdir.hpp"

using namespace ftlab;
using namespace ftlab::steer;
using ftlab::test::TmpDir;

namespace {

lm::TransformerConfig tiny_config() {
    lm::TransformerConfig cfg;
    cfg.n_layers = 2;
    cfg.d_model = 8;
    cfg.d_ffn = 16;
    cfg.n_heads = 2;
    cfg.vocab_size = 16;
    cfg.max_seq_len = 8;
    cfg.tie_embeddings = true;  // nonzero logits straight from init
    return cfg;
}

corpus::FunctionTokenSet fset_of(std::vector<corpus::TokenId> ids) {
    corpus::FunctionTokenSet f;
    f.token_ids = std::move(ids);
    f.rebuild_index();
    return f;
}

sae::SaeModel<double> identity_sae(int d, int layer) {
    auto m = sae::SaeModel<double>::zeros(d, 2 * d);
    for (int i = 0; i < d; ++i) {
        m.w_dec.at(i, i) = 1.0;
        m.w_dec.at(i, d + i) = -1.0;
        m.w_enc.at(i, i) = 1.0;
        m.w_enc.at(d + i, i) = -1.0;
    }
    m.host_layer = layer;
    return m;
}

corpus::Tokenizer word_tokenizer() {
    auto cp = corpus::Corpus::from_texts({"a b c d e f g h"});
    return corpus::Tokenizer::whitespace_from_corpus(cp);
}

corpus::TokenId id_of(const corpus::Tokenizer& tok, const std::string& s) {
    for (corpus::TokenId i = 0; i < static_cast<corpus::TokenId>(tok.vocab_size()); ++i) {
        if (tok.surface(i) == s) return i;
    }
    REQUIRE(false);
    return 0;
}

}  // namespace

TEST_CASE("minimal prefix search") {
    auto pattern = [](std::vector<bool> p) {
        return [p](int k) { return p[k - 1]; };
    };

    SUBCASE("monotone patterns match the exhaustive scan") {
        for (int boundary = 1; boundary <= 6; ++boundary) {
            std::vector<bool> p(6, false);
            for (int k = boundary; k <= 6; ++k) p[k - 1] = true;
            auto res = minimal_prefix_search(6, pattern(p));
            CHECK(res.k == boundary);
            CHECK_FALSE(res.linear_fallback);
        }
    }

    SUBCASE("local boundary semantics on a non-monotone pattern") {
        // [T,F,F,T]: the search lands on 4 and the boundary holds there
        auto res = minimal_prefix_search(4, pattern({true, false, false, true}));
        CHECK(res.k == 4);
        CHECK_FALSE(res.linear_fallback);
    }

    SUBCASE("nothing succeeds") {
        auto res = minimal_prefix_search(3, pattern({false, false, false}));
        CHECK(res.k == 0);
        CHECK(res.linear_fallback);
    }

    SUBCASE("an unstable predicate trips verification into the linear scan") {
        int calls = 0;
        auto flaky = [&calls](int k) {
            ++calls;
            if (calls <= 2) return false;  // search probes fail -> lands at 4
            return k == 1;                 // verification contradicts, scan finds 1
        };
        auto res = minimal_prefix_search(4, flaky);
        CHECK(res.linear_fallback);
        CHECK(res.k == 1);
    }
}

TEST_CASE("steer vector extraction") {
    auto model = lm::TransformerModel<double>::init(tiny_config(), 3);
    auto fset = fset_of({2, 5});
    std::vector<corpus::TokenId> prompt{1, 5, 3, 2, 4};  // last function token at index 3

    auto sv = extract_steer_vector(model, prompt, 1, fset);
    CHECK(sv.layer == 1);
    CHECK(sv.alpha == 1.0);
    CHECK(sv.source == SteerSource::raw_activation);
    REQUIRE(sv.v.size() == 8);

    SUBCASE("equals the forward tap at the site") {
        lm::ForwardCache<double> cache;
        lm::forward(model, {prompt}, cache);
        const double* row = cache.taps(1).row(3);
        for (int j = 0; j < 8; ++j) CHECK(sv.v[j] == row[j]);
    }

    SUBCASE("deterministic") {
        auto sv2 = extract_steer_vector(model, prompt, 1, fset);
        CHECK(sv.v == sv2.v);
    }

    SUBCASE("no function token means no injection site") {
        std::vector<corpus::TokenId> bare{1, 3, 4};
        CHECK_THROWS_WITH_AS(extract_steer_vector(model, bare, 1, fset),
                             doctest::Contains("no injection site"), DomainError);
    }

    SUBCASE("layer bounds") {
        CHECK_THROWS_AS(extract_steer_vector(model, prompt, 2, fset), ConfigError);
        CHECK_THROWS_AS(extract_steer_vector(model, prompt, -1, fset), ConfigError);
    }
}

TEST_CASE("feature steering vectors") {
    auto m = identity_sae(4, 0);

    SUBCASE("singleton selects one column") {
        auto sv = make_feature_steering_vector(m, {2}, 3.0);
        CHECK(sv.v == std::vector<double>{0.0, 0.0, 3.0, 0.0});
        CHECK(sv.source == SteerSource::single_feature);
        CHECK(sv.features == std::vector<std::uint32_t>{2});
        CHECK(sv.layer == 0);
    }

    SUBCASE("pair sums two columns") {
        auto sv = make_feature_steering_vector(m, {1, 6}, 2.0);
        // col 1 = e_1, col 6 = -e_2
        std::vector<double> expect{0.0, 2.0, -2.0, 0.0};
        CHECK(sv.v == expect);
        CHECK(sv.source == SteerSource::feature_set);
    }

    SUBCASE("alpha zero gives the zero vector") {
        auto sv = make_feature_steering_vector(m, {0, 1, 2}, 0.0);
        for (auto x : sv.v) CHECK(x == 0.0);
    }

    SUBCASE("linear in alpha") {
        auto a = make_feature_steering_vector(m, {0, 3}, 1.5);
        auto b = make_feature_steering_vector(m, {0, 3}, 3.0);
        for (int j = 0; j < 4; ++j) CHECK(std::abs(b.v[j] - 2.0 * a.v[j]) < 1e-12);
    }

    SUBCASE("errors") {
        CHECK_THROWS_AS(make_feature_steering_vector(m, {}, 1.0), ConfigError);
        CHECK_THROWS_AS(make_feature_steering_vector(m, {8}, 1.0), DomainError);
    }
}

TEST_CASE("steer vector decomposition") {
    auto m = identity_sae(8, 1);

    SUBCASE("dominant column ranks first") {
        SteerVector<double> v;
        v.layer = 1;
        v.v.assign(8, 0.0);
        v.v[5] = 3.0;  // 3 * col_5
        v.v[2] = 1.0;
        auto ranked = decompose_steer_vector(m, v);
        REQUIRE(ranked.size() == 2);
        CHECK(ranked[0].id == 5);
        CHECK(ranked[0].strength == 3.0);
        CHECK(ranked[1].id == 2);
        for (std::size_t i = 1; i < ranked.size(); ++i)
            CHECK(ranked[i].strength <= ranked[i - 1].strength);
        for (const auto& r : ranked) CHECK(r.strength > 0.0);
    }

    SUBCASE("ties keep the lower feature id first") {
        SteerVector<double> v;
        v.layer = 1;
        v.v.assign(8, 0.0);
        v.v[2] = 1.0;
        v.v[5] = 1.0;
        auto ranked = decompose_steer_vector(m, v);
        REQUIRE(ranked.size() == 2);
        CHECK(ranked[0].id == 2);
        CHECK(ranked[1].id == 5);
    }

    SUBCASE("zero vector is outside the dictionary support") {
        SteerVector<double> v;
        v.layer = 1;
        v.v.assign(8, 0.0);
        CHECK_THROWS_WITH_AS(decompose_steer_vector(m, v),
                             doctest::Contains("outside dictionary support"), DomainError);
    }

    SUBCASE("layer and width mismatches") {
        SteerVector<double> v;
        v.layer = 0;
        v.v.assign(8, 1.0);
        CHECK_THROWS_AS(decompose_steer_vector(m, v), DomainError);
        v.layer = 1;
        v.v.assign(4, 1.0);
        CHECK_THROWS_AS(decompose_steer_vector(m, v), ConfigError);
    }
}

TEST_CASE("steering application") {
    auto model = lm::TransformerModel<double>::init(tiny_config(), 5);
    auto fset = fset_of({2});
    std::vector<corpus::TokenId> prompt{1, 2, 4};  // site = index 1
    auto sae = identity_sae(8, 0);

    SUBCASE("zero vector reproduces unsteered generation exactly") {
        auto zero = make_feature_steering_vector(sae, {0, 1}, 0.0);
        zero.layer = 0;
        auto steered = apply_steering(model, prompt, zero, 4, fset);
        auto plain = lm::greedy_generate(model, prompt, 4);
        CHECK(steered == plain);
    }

    SUBCASE("deterministic") {
        auto sv = make_feature_steering_vector(sae, {3}, 8.0);
        auto a = apply_steering(model, prompt, sv, 4, fset);
        auto b = apply_steering(model, prompt, sv, 4, fset);
        CHECK(a == b);
    }

    SUBCASE("positions before the site keep their logits") {
        auto sv = make_feature_steering_vector(sae, {1, 4}, 50.0);
        lm::TapHook<double> hook;
        hook.layer = 0;
        hook.fn = [&sv](int, int pos, double* h) {
            if (pos == 1) {
                for (int j = 0; j < 8; ++j) h[j] += sv.v[j];
            }
        };
        lm::ForwardCache<double> plain, poked;
        lm::forward(model, {prompt}, plain);
        lm::forward(model, {prompt}, poked, &hook);
        for (int j = 0; j < 16; ++j) {
            CHECK(plain.logits.at(0, j) == poked.logits.at(0, j));  // pos 0 untouched
        }
        bool site_changed = false;
        for (int j = 0; j < 16; ++j)
            site_changed = site_changed || plain.logits.at(1, j) != poked.logits.at(1, j);
        CHECK(site_changed);
    }

    SUBCASE("missing injection site") {
        auto sv = make_feature_steering_vector(sae, {0}, 1.0);
        std::vector<corpus::TokenId> bare{1, 3};
        CHECK_THROWS_WITH_AS(apply_steering(model, bare, sv, 2, fset),
                             doctest::Contains("no injection site"), DomainError);
    }
}

TEST_CASE("judges") {
    auto tok = word_tokenizer();
    const auto a = id_of(tok, "a"), b = id_of(tok, "b"), c = id_of(tok, "c"), d = id_of(tok, "d");

    SUBCASE("first_token_in_set") {
        JudgeSpec spec{"first_token_in_set", {{"tokens", {"b", "d"}}}};
        auto judge = make_judge(spec, tok);
        CHECK(judge({b, c}));
        CHECK(judge({d}));
        CHECK_FALSE(judge({c, b}));
        CHECK_FALSE(judge({}));
    }

    SUBCASE("any_token_in_set") {
        JudgeSpec spec{"any_token_in_set", {{"tokens", {"d"}}}};
        auto judge = make_judge(spec, tok);
        CHECK(judge({a, d}));
        CHECK_FALSE(judge({a, b, c}));
    }

    SUBCASE("fraction_in_set") {
        JudgeSpec spec{"fraction_in_set", {{"tokens", {"a", "b"}}, {"min_fraction", 0.5}}};
        auto judge = make_judge(spec, tok);
        CHECK(judge({a, b, c, d}));
        CHECK_FALSE(judge({a, c, c, c}));
        CHECK_FALSE(judge({}));
    }

    SUBCASE("judges are pure") {
        JudgeSpec spec{"first_token_in_set", {{"tokens", {"a"}}}};
        auto judge = make_judge(spec, tok);
        std::vector<corpus::TokenId> out{a, b};
        CHECK(judge(out) == judge(out));
    }

    SUBCASE("bad specs are config errors") {
        CHECK_THROWS_AS(make_judge({"no_such_judge", {{"tokens", {"a"}}}}, tok), ConfigError);
        CHECK_THROWS_AS(make_judge({"first_token_in_set", {{"tokens", {"zz"}}}}, tok),
                        ConfigError);
        CHECK_THROWS_AS(make_judge({"first_token_in_set", nlohmann::json::object()}, tok),
                        ConfigError);
    }
}

TEST_CASE("trait specs") {
    nlohmann::json j{{"name", "letter-b"},
                     {"trait_prompt", "b b a"},
                     {"test_prompts", {"c a", "d a"}},
                     {"judge", {{"type", "first_token_in_set"}, {"params", {{"tokens", {"b"}}}}}}};

    auto trait = trait_from_json(j);
    CHECK(trait.name == "letter-b");
    CHECK(trait.test_prompts.size() == 2);
    CHECK(trait.judge.type == "first_token_in_set");

    SUBCASE("file round-trip") {
        TmpDir tmp;
        const auto path = tmp.path / "trait.json";
        const auto text = j.dump(2);
        io::write_file_atomic(path, text.data(), text.size());
        auto loaded = load_trait_spec(path);
        CHECK(loaded.name == trait.name);
        CHECK(loaded.trait_prompt == trait.trait_prompt);
        CHECK(loaded.test_prompts == trait.test_prompts);
    }

    SUBCASE("missing pieces are config errors") {
        auto bad = j;
        bad.erase("test_prompts");
        CHECK_THROWS_AS(trait_from_json(bad), ConfigError);
        bad = j;
        bad["test_prompts"] = nlohmann::json::array();
        CHECK_THROWS_AS(trait_from_json(bad), ConfigError);
        bad = j;
        bad.erase("judge");
        CHECK_THROWS_AS(trait_from_json(bad), ConfigError);
    }

    SUBCASE("unparseable file") {
        TmpDir tmp;
        const auto path = tmp.path / "trait.json";
        const std::string text = "{not json";
        io::write_file_atomic(path, text.data(), text.size());
        CHECK_THROWS_AS(load_trait_spec(path), ConfigError);
    }
}

TEST_CASE("informative layer search") {
    auto model = lm::TransformerModel<double>::init(tiny_config(), 9);
    auto fset = fset_of({2});
    SteerContext<double> ctx;
    ctx.model = &model;
    ctx.fset = &fset;
    ctx.test_prompts = {{1, 2}, {3, 2}, {4, 2}};
    ctx.max_new_tokens = 2;
    std::vector<corpus::TokenId> trait_prompt{5, 2};

    SUBCASE("constant success ties to layer zero") {
        ctx.judge = [](const std::vector<corpus::TokenId>&) { return true; };
        auto res = find_informative_layer(ctx, trait_prompt, 1.0);
        CHECK(res.rates == std::vector<double>{1.0, 1.0});
        CHECK(res.chosen_layer == 0);
        CHECK(res.warning.empty());
    }

    SUBCASE("constant failure warns") {
        ctx.judge = [](const std::vector<corpus::TokenId>&) { return false; };
        auto res = find_informative_layer(ctx, trait_prompt, 1.0);
        CHECK(res.rates == std::vector<double>{0.0, 0.0});
        CHECK_FALSE(res.warning.empty());
    }
}

TEST_CASE("trait pipeline plumbing") {
    auto model = lm::TransformerModel<double>::init(tiny_config(), 13);
    auto tok = word_tokenizer();
    const auto a_id = id_of(tok, "a");
    auto fset = fset_of({a_id});

    TraitSpec trait;
    trait.name = "always";
    trait.trait_prompt = "b a";
    trait.test_prompts = {"c a", "d a", "e a"};
    trait.judge = {"fraction_in_set", {{"tokens", {"a", "b", "c", "d", "e", "f", "g", "h"}},
                                       {"min_fraction", 0.0}}};

    SteerOptions opts;
    opts.max_new_tokens = 2;

    SUBCASE("sae on the wrong layer is rejected") {
        auto sae = identity_sae(8, 1);  // constant judge picks layer 0
        CHECK_THROWS_WITH_AS(run_trait_pipeline(model, sae, tok, fset, trait, opts),
                             doctest::Contains("informative layer"), DomainError);
    }

    SUBCASE("report structure on a trivially steerable trait") {
        auto sae = identity_sae(8, 0);
        auto report = run_trait_pipeline(model, sae, tok, fset, trait, opts);
        CHECK(report.trait == "always");
        CHECK(report.chosen_layer == 0);
        CHECK(report.layer_rates == std::vector<double>{1.0, 1.0});
        CHECK(report.alpha == 1.0);   // first rung of the ladder succeeds
        CHECK(report.k == 1);         // every prefix passes, so the minimum is 1
        CHECK(report.s_k.size() == 1);
        CHECK_FALSE(report.linear_fallback);
        CHECK(report.per_prompt.size() == 3);
        CHECK(report.flip_rate == 0.0);  // unsteered already passes everywhere

        TmpDir tmp;
        const auto path = tmp.path / "steer.json";
        write_steer_report(path, report);
        const auto bytes = io::read_file(path);
        auto parsed = nlohmann::json::parse(bytes.begin(), bytes.end());
        CHECK(parsed["trait"] == "always");
        CHECK(parsed["k"] == 1);
        CHECK(parsed["S_k"].size() == 1);
        CHECK(parsed["per_prompt_results"].size() == 3);
    }
}
