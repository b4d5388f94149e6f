#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "pcconf/rng.hpp"

using pcconf::Rng;

TEST_CASE("same seed reproduces the exact sequence") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Rng c(42), d(42);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(c.u01() == d.u01());
        REQUIRE(c.normal() == d.normal());
    }
}

TEST_CASE("derive_seed depends on tag and root only") {
    REQUIRE(pcconf::derive_seed(1, "world") == pcconf::derive_seed(1, "world"));
    REQUIRE(pcconf::derive_seed(1, "world") != pcconf::derive_seed(2, "world"));
    REQUIRE(pcconf::derive_seed(1, "world") != pcconf::derive_seed(1, "train"));
    // derivation is draw-order independent
    Rng r(7);
    auto s1 = r.stream("a").seed();
    r.next_u64();
    REQUIRE(r.stream("a").seed() == s1);
    REQUIRE(r.stream("id", 3).seed() == r.stream("id/3").seed());
}

TEST_CASE("sibling streams differ") {
    Rng root(123);
    Rng a = root.stream("identity", 0);
    Rng b = root.stream("identity", 1);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    REQUIRE(same == 0);
}

TEST_CASE("u01 lands in [0,1), u01_open in (0,1)") {
    Rng r(5);
    for (int i = 0; i < 20000; ++i) {
        double u = r.u01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        double v = r.u01_open();
        REQUIRE(v > 0.0);
        REQUIRE(v < 1.0);
    }
}

TEST_CASE("normal deviates have sane moments") {
    Rng r(11);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        s += x;
        s2 += x * x;
    }
    double mean = s / n;
    double var = s2 / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.01);
    REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("exponential has mean 1") {
    Rng r(13);
    const int n = 200000;
    double s = 0;
    for (int i = 0; i < n; ++i) s += r.exponential();
    REQUIRE(std::abs(s / n - 1.0) < 0.02);
}

TEST_CASE("beta(a,b) matches analytic mean and variance") {
    Rng r(17);
    const int n = 200000;
    double a = 9.0, b = 2.0;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double x = r.beta(a, b);
        REQUIRE(x >= 0.0);
        REQUIRE(x <= 1.0);
        s += x;
        s2 += x * x;
    }
    double mean = s / n;
    double var = s2 / n - mean * mean;
    double want_mean = a / (a + b);
    double want_var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
    REQUIRE(std::abs(mean - want_mean) < 0.005);
    REQUIRE(std::abs(var - want_var) < 0.002);
    // shape < 1 branch
    double s3 = 0;
    for (int i = 0; i < n; ++i) s3 += r.beta(0.5, 0.5);
    REQUIRE(std::abs(s3 / n - 0.5) < 0.01);
}

TEST_CASE("below(n) is unbiased over small n and rejects 0") {
    Rng r(19);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(r.below(7))]++;
    for (int c : counts) REQUIRE(std::abs(c - 10000) < 500);
    REQUIRE_THROWS_AS(r.below(0), std::invalid_argument);
}

TEST_CASE("sample_distinct returns k distinct in-range indices") {
    Rng r(23);
    auto got = r.sample_distinct(64, 6);
    REQUIRE(got.size() == 6);
    std::set<std::uint32_t> uniq(got.begin(), got.end());
    REQUIRE(uniq.size() == 6);
    for (auto v : got) REQUIRE(v < 64);
    REQUIRE_THROWS_AS(r.sample_distinct(3, 4), std::invalid_argument);
}

TEST_CASE("shuffle is a permutation and seed-stable") {
    Rng r1(29), r2(29);
    std::vector<int> v1 = {1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> v2 = v1;
    r1.shuffle(v1);
    r2.shuffle(v2);
    REQUIRE(v1 == v2);
    std::multiset<int> m(v1.begin(), v1.end());
    REQUIRE(m == std::multiset<int>({1, 2, 3, 4, 5, 6, 7, 8}));
}
