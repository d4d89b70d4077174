#include "clustex/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

using namespace clustex;

TEST_CASE("splitmix64 matches the reference stream for seed 0") {
    // First five outputs of the reference SplitMix64 implementation.
    Rng rng(0);
    CHECK(rng.next_u64() == 0xe220a8397b1dcdafULL);
    CHECK(rng.next_u64() == 0x6e789e6aa1b965f4ULL);
    CHECK(rng.next_u64() == 0x06c45d188009454fULL);
    CHECK(rng.next_u64() == 0xf88bb8a8724c81ecULL);
    CHECK(rng.next_u64() == 0x1b39896a51a8749bULL);
}

TEST_CASE("splitmix64 matches the reference stream for a nonzero seed") {
    Rng rng(1234567);
    CHECK(rng.next_u64() == 0x599ed017fb08fc85ULL);
    CHECK(rng.next_u64() == 0x2c73f08458540fa5ULL);
    CHECK(rng.next_u64() == 0x883ebce5a3f27c77ULL);
}

TEST_CASE("same seed replays the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("next_below stays inside the bound and reaches every value") {
    Rng rng(7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const std::uint64_t v = rng.next_below(6);
        CHECK(v < 6);
        seen.insert(v);
    }
    CHECK(seen.size() == 6);
}

TEST_CASE("next_double lies in [0, 1) and fills the range") {
    Rng rng(3);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 5000; ++i) {
        const double v = rng.next_double();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("bounded next_double respects its interval") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.next_double(2.5, 3.5);
        CHECK(v >= 2.5);
        CHECK(v < 3.5);
    }
}

TEST_CASE("shuffle permutes without losing elements") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    Rng rng(9);
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
    // 50 elements virtually never shuffle back into identity
    bool moved = false;
    for (int i = 0; i < 50; ++i) moved = moved || v[static_cast<std::size_t>(i)] != i;
    CHECK(moved);
}

TEST_CASE("shuffle is deterministic for a fixed seed") {
    std::vector<int> a(20), b(20);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    Rng ra(123), rb(123);
    ra.shuffle(a);
    rb.shuffle(b);
    CHECK(a == b);
}

TEST_CASE("derive_seed separates counters and roots") {
    std::set<std::uint64_t> seeds;
    for (std::uint64_t root : {1ULL, 2ULL, 99ULL})
        for (std::uint64_t counter = 0; counter < 20; ++counter)
            seeds.insert(derive_seed(root, counter));
    CHECK(seeds.size() == 60);
    CHECK(derive_seed(1, 5) == derive_seed(1, 5));
}
