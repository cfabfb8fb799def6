#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "ftlab/errors.hpp"
#include "ftlab/graph/bipartite.hpp"
#include "ftlab/io/container.hpp"
#include "ftlab/io/csv.hpp"
#include "ftlab/rng.hpp"
#include "tmpdir.hpp"

using namespace ftlab;
using namespace ftlab::graph;
using ftlab::test::TmpDir;

namespace {

// decoder [I, -I]: coordinate j > 0 fires feature j, < 0 fires d + j
sae::SaeModel<double> test_sae(int d, std::int64_t step, int layer) {
    auto m = sae::SaeModel<double>::zeros(d, 2 * d);
    for (int i = 0; i < d; ++i) {
        m.w_dec.at(i, i) = 1.0;
        m.w_dec.at(i, d + i) = -1.0;
        m.w_enc.at(i, i) = 1.0;
        m.w_enc.at(d + i, i) = -1.0;
    }
    m.host_step = step;
    m.host_layer = layer;
    return m;
}

lm::ActivationShard shard_of(const std::vector<std::pair<TokenId, std::vector<float>>>& rows,
                             std::int64_t step, int layer, int d) {
    lm::ActivationShard s;
    s.meta.checkpoint_step = step;
    s.meta.layers = {layer};
    s.meta.d_model = d;
    s.meta.sample_seed = 9;
    s.meta.n_records = static_cast<std::int64_t>(rows.size());
    s.vectors.resize(static_cast<int>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        lm::ActRecord r;
        r.doc_id = static_cast<std::int64_t>(i);
        r.position = static_cast<std::uint32_t>(i);
        r.token_id = rows[i].first;
        r.layer = static_cast<std::uint32_t>(layer);
        s.records.push_back(r);
        std::copy(rows[i].second.begin(), rows[i].second.end(), s.vectors.row(static_cast<int>(i)));
    }
    return s;
}

// adjacency built straight from an edge list, no shards involved
BipartiteGraph hand_graph(int vocab, const std::vector<std::pair<TokenId, std::uint32_t>>& edges) {
    BipartiteGraph g;
    g.prov.vocab_size = vocab;
    g.adj.resize(vocab);
    for (auto [t, f] : edges) g.adj[t].push_back(f);
    for (auto& nbrs : g.adj) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    return g;
}

}  // namespace

TEST_CASE("bipartite construction") {
    const int d = 4;
    auto m = test_sae(d, 100, 0);

    SUBCASE("repeated firings collapse to one edge") {
        std::vector<std::pair<TokenId, std::vector<float>>> rows;
        for (int i = 0; i < 500; ++i) rows.push_back({3, {0.f, 0.f, 0.f, 2.f}});  // feature 3
        auto g = build_bipartite({shard_of(rows, 100, 0, d)}, m, 16);
        CHECK(g.n_edges() == 1);
        CHECK(g.adj[3] == std::vector<std::uint32_t>{3});
    }

    SUBCASE("empty shard gives an empty graph") {
        auto g = build_bipartite({shard_of({}, 100, 0, d)}, m, 16);
        CHECK(g.n_edges() == 0);
        CHECK(g.n_token_nodes() == 0);
        CHECK(g.feature_nodes().empty());
    }

    SUBCASE("edge set equals per-record enumeration") {
        Rng rng(17);
        std::vector<std::pair<TokenId, std::vector<float>>> rows;
        for (int i = 0; i < 20; ++i) {
            std::vector<float> v(d);
            for (auto& x : v) x = static_cast<float>(rng.normal());
            rows.push_back({static_cast<TokenId>(rng.below(6)), v});
        }
        auto g = build_bipartite({shard_of(rows, 100, 0, d)}, m, 16);

        std::set<std::pair<TokenId, std::uint32_t>> brute;
        for (const auto& [t, v] : rows) {
            std::vector<double> x(v.begin(), v.end());
            auto code = sae_encode(m, x.data());
            for (auto f : code.ids) brute.insert({t, f});
        }
        std::set<std::pair<TokenId, std::uint32_t>> got;
        for (TokenId t = 0; t < g.adj.size(); ++t) {
            for (auto f : g.adj[t]) got.insert({t, f});
        }
        CHECK(got == brute);
    }

    SUBCASE("re-ingesting the same shard changes nothing") {
        auto s = shard_of({{1, {1.f, 0.f, 0.f, 0.f}}, {2, {0.f, -1.f, 0.f, 0.f}}}, 100, 0, d);
        auto g = build_bipartite({s}, m, 16);
        const auto before = g.adj;
        ingest_shard(g, s, m);
        CHECK(g.adj == before);
    }

    SUBCASE("split shards and one shard agree") {
        std::vector<std::pair<TokenId, std::vector<float>>> rows;
        Rng rng(23);
        for (int i = 0; i < 30; ++i) {
            std::vector<float> v(d);
            for (auto& x : v) x = static_cast<float>(rng.normal());
            rows.push_back({static_cast<TokenId>(rng.below(5)), v});
        }
        auto whole = build_bipartite({shard_of(rows, 100, 0, d)}, m, 16);
        decltype(rows) a(rows.begin(), rows.begin() + 11), b(rows.begin() + 11, rows.end());
        auto split = build_bipartite({shard_of(a, 100, 0, d), shard_of(b, 100, 0, d)}, m, 16);
        auto swapped = build_bipartite({shard_of(b, 100, 0, d), shard_of(a, 100, 0, d)}, m, 16);
        CHECK(split.adj == whole.adj);
        CHECK(swapped.adj == whole.adj);
    }

    SUBCASE("provenance mismatches are rejected") {
        auto s = shard_of({{1, {1.f, 0.f, 0.f, 0.f}}}, 100, 0, d);
        auto wrong_step = test_sae(d, 999, 0);
        CHECK_THROWS_WITH_AS(build_bipartite({s}, wrong_step, 16),
                             doctest::Contains("checkpoint step"), DomainError);
        auto wrong_layer = test_sae(d, 100, 3);
        CHECK_THROWS_WITH_AS(build_bipartite({s}, wrong_layer, 16),
                             doctest::Contains("host layer"), DomainError);
        auto wrong_width = test_sae(d + 1, 100, 0);
        CHECK_THROWS_WITH_AS(build_bipartite({s}, wrong_width, 16),
                             doctest::Contains("width"), DomainError);
    }
}

TEST_CASE("token degrees") {
    auto g = hand_graph(8, {{0, 1}, {0, 2}, {0, 9}, {2, 5}});
    const std::vector<TokenId> ranking{0, 1, 2, 3};
    auto rows = token_degrees(g, ranking);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].degree == 3);
    CHECK(rows[1].degree == 0);  // never fired
    CHECK(rows[2].degree == 1);
    CHECK(rows[3].degree == 0);

    SUBCASE("degree sums match the edge count on both sides") {
        Rng rng(31);
        std::vector<std::pair<TokenId, std::uint32_t>> edges;
        for (int i = 0; i < 200; ++i)
            edges.push_back({static_cast<TokenId>(rng.below(12)),
                             static_cast<std::uint32_t>(rng.below(40))});
        auto big = hand_graph(12, edges);
        std::vector<TokenId> all(12);
        for (TokenId t = 0; t < 12; ++t) all[t] = t;
        std::int64_t token_sum = 0;
        for (const auto& r : token_degrees(big, all)) token_sum += r.degree;
        std::vector<std::int64_t> fdeg(64, 0);
        for (const auto& nbrs : big.adj) {
            for (auto f : nbrs) fdeg[f] += 1;
        }
        std::int64_t feature_sum = 0;
        for (auto v : fdeg) feature_sum += v;
        CHECK(token_sum == big.n_edges());
        CHECK(feature_sum == big.n_edges());
    }
}

TEST_CASE("cumulative feature coverage") {
    // N(A)={1,2}, N(B)={2,3}, N(C)={4}
    auto g = hand_graph(3, {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 4}});
    const std::vector<TokenId> ranking{0, 1, 2};

    CHECK(cumulative_feature_coverage(g, ranking, 2) == 0.75);
    CHECK(cumulative_feature_coverage(g, ranking, 3) == 1.0);

    auto curve = coverage_curve(g, ranking);
    REQUIRE(curve.size() == 3);
    CHECK(curve[0].covered == 2);
    CHECK(curve[1].covered == 3);
    CHECK(curve[2].covered == 4);
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].covered >= curve[i - 1].covered);

    SUBCASE("brute-force union oracle on a random graph") {
        Rng rng(47);
        std::vector<std::pair<TokenId, std::uint32_t>> edges;
        for (int i = 0; i < 400; ++i)
            edges.push_back({static_cast<TokenId>(rng.below(20)),
                             static_cast<std::uint32_t>(rng.below(60))});
        auto big = hand_graph(20, edges);
        std::vector<TokenId> ranks(20);
        for (TokenId t = 0; t < 20; ++t) ranks[t] = t;
        rng.shuffle(ranks.begin(), ranks.end());

        std::set<std::uint32_t> denom, seen;
        for (const auto& nbrs : big.adj) denom.insert(nbrs.begin(), nbrs.end());
        auto curve2 = coverage_curve(big, ranks);
        for (int k = 1; k <= 20; ++k) {
            const auto& nbrs = big.adj[ranks[k - 1]];
            seen.insert(nbrs.begin(), nbrs.end());
            CHECK(curve2[k - 1].covered == static_cast<std::int64_t>(seen.size()));
            CHECK(curve2[k - 1].fraction ==
                  static_cast<double>(seen.size()) / static_cast<double>(denom.size()));
        }
        CHECK(curve2.back().fraction == 1.0);
    }

    SUBCASE("errors") {
        BipartiteGraph empty;
        empty.prov.vocab_size = 3;
        empty.adj.resize(3);
        CHECK_THROWS_AS(coverage_curve(empty, ranking), DomainError);
        CHECK_THROWS_AS(cumulative_feature_coverage(g, ranking, 0), ConfigError);
        CHECK_THROWS_AS(cumulative_feature_coverage(g, ranking, 4), ConfigError);
    }
}

TEST_CASE("activation rate") {
    auto g = hand_graph(4, {{0, 0}, {0, 1}, {1, 2}, {2, 3}});
    CHECK(activation_rate(g, 8) == 0.5);

    BipartiteGraph empty;
    empty.prov.vocab_size = 4;
    empty.adj.resize(4);
    CHECK(activation_rate(empty, 8) == 0.0);

    CHECK_THROWS_AS(activation_rate(g, 3), DomainError);
    CHECK_THROWS_AS(activation_rate(g, 0), ConfigError);
}

TEST_CASE("degree by checkpoint") {
    auto g1 = hand_graph(5, {{0, 1}, {1, 2}});
    auto g2 = hand_graph(5, {{0, 1}, {0, 3}, {1, 2}, {3, 7}});
    g1.prov.checkpoint_step = 1000;
    g2.prov.checkpoint_step = 5000;
    std::vector<TokenId> ranking{0, 1, 2, 3, 4};

    SUBCASE("single graph matches token_degrees") {
        auto table = degree_by_checkpoint({&g1}, ranking);
        auto rows = token_degrees(g1, ranking);
        REQUIRE(table.degrees.size() == rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) CHECK(table.degrees[r][0] == rows[r].degree);
        CHECK(table.steps == std::vector<std::int64_t>{1000});
    }

    SUBCASE("identical graphs give identical columns") {
        auto table = degree_by_checkpoint({&g1, &g1}, ranking);
        for (const auto& row : table.degrees) CHECK(row[0] == row[1]);
    }

    SUBCASE("edge supersets dominate element-wise") {
        auto table = degree_by_checkpoint({&g1, &g2}, ranking);
        for (const auto& row : table.degrees) CHECK(row[1] >= row[0]);
    }

    SUBCASE("vocabulary mismatch is rejected") {
        auto other = hand_graph(6, {{0, 1}});
        CHECK_THROWS_AS(degree_by_checkpoint({&g1, &other}, ranking), DomainError);
    }
}

TEST_CASE("graph file round-trip") {
    TmpDir tmp;
    const auto path = tmp.path / "graph.bin";
    auto g = hand_graph(6, {{0, 1}, {0, 4}, {2, 1}, {5, 9}, {5, 2}});
    g.prov.checkpoint_step = 5000;
    g.prov.layer = 1;
    g.prov.sample_seed = 77;
    g.prov.dictionary_width = 16;
    save_graph(path, g);

    auto back = load_graph(path);
    CHECK(back.adj == g.adj);
    CHECK(back.prov.checkpoint_step == 5000);
    CHECK(back.prov.layer == 1);
    CHECK(back.prov.sample_seed == 77);
    CHECK(back.prov.vocab_size == 6);
    CHECK(back.prov.dictionary_width == 16);

    SUBCASE("save-load-save is byte identical") {
        const auto again = tmp.path / "graph2.bin";
        save_graph(again, back);
        CHECK(io::read_file(path) == io::read_file(again));
    }
    SUBCASE("corruption is caught") {
        auto bytes = io::read_file(path);
        bytes[bytes.size() - 3] ^= 0x11;
        io::write_file_atomic(path, bytes.data(), bytes.size());
        CHECK_THROWS_WITH_AS(load_graph(path), doctest::Contains("checksum"), DomainError);
    }
}

TEST_CASE("graph reports") {
    TmpDir tmp;
    auto g = hand_graph(3, {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 4}});
    std::vector<TokenId> ranking{0, 1, 2};
    std::vector<std::string> surfaces{"the", ",", "cat"};

    const auto cov = tmp.path / "coverage.csv";
    write_coverage_report(cov, coverage_curve(g, ranking), {"ftlab"}, &surfaces);
    auto ct = io::read_csv(cov);
    REQUIRE(ct.rows.size() == 3);
    CHECK(ct.header == std::vector<std::string>{"k", "token", "covered", "fraction"});
    CHECK(ct.rows[0][1] == "the");
    CHECK(ct.rows[2][2] == "4");

    const auto deg = tmp.path / "degree.csv";
    write_degree_report(deg, token_degrees(g, ranking), {}, &surfaces);
    auto dt = io::read_csv(deg);
    REQUIRE(dt.rows.size() == 3);
    CHECK(dt.rows[0][0] == "1");
    CHECK(dt.rows[1][2] == "2");
}
