#include <doctest.h>

#include <set>
#include <vector>

#include "ftlab/errors.hpp"
#include "ftlab/rng.hpp"

using ftlab::Rng;

TEST_CASE("substreams are deterministic and independent") {
    auto a1 = Rng::substream(42, "init");
    auto a2 = Rng::substream(42, "init");
    auto b = Rng::substream(42, "batching");
    auto c = Rng::substream(43, "init");

    std::vector<std::uint64_t> va, vb, vc;
    for (int i = 0; i < 16; ++i) {
        auto x = a1.next_u64();
        CHECK(x == a2.next_u64());
        va.push_back(x);
        vb.push_back(b.next_u64());
        vc.push_back(c.next_u64());
    }
    CHECK(va != vb);
    CHECK(va != vc);
}

TEST_CASE("below stays in range and covers values") {
    auto r = Rng::substream(7, "t");
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        auto v = r.below(10);
        CHECK(v < 10);
        seen.insert(v);
    }
    CHECK(seen.size() == 10);
}

TEST_CASE("uniform lies in [0,1), normal is finite") {
    auto r = Rng::substream(7, "u");
    double acc = 0.0;
    for (int i = 0; i < 5000; ++i) {
        double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        acc += u;
    }
    CHECK(acc / 5000 == doctest::Approx(0.5).epsilon(0.05));

    for (int i = 0; i < 1000; ++i) {
        CHECK(std::isfinite(r.normal()));
        double t = r.trunc_normal(0.02);
        CHECK(std::abs(t) <= 0.04 + 1e-15);
    }
}

TEST_CASE("state serialization round-trips exactly") {
    auto r = Rng::substream(99, "ckpt");
    for (int i = 0; i < 37; ++i) r.next_u64();
    auto saved = r.serialize();

    Rng restored;
    restored.deserialize(saved);
    for (int i = 0; i < 64; ++i) {
        CHECK(restored.next_u64() == r.next_u64());
    }

    Rng bad;
    CHECK_THROWS_AS(bad.deserialize("not a state"), ftlab::DomainError);
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    auto v2 = v1;
    auto r1 = Rng::substream(5, "s");
    auto r2 = Rng::substream(5, "s");
    r1.shuffle(v1.begin(), v1.end());
    r2.shuffle(v2.begin(), v2.end());
    CHECK(v1 == v2);
    std::set<int> s(v1.begin(), v1.end());
    CHECK(s.size() == 10);
}
