#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "mil/rng.hpp"

using mil::Rng;

TEST_SUITE_BEGIN("rng");

TEST_CASE("identical seed and path give identical sequences") {
    Rng a = Rng(123).fork("augment").fork(7).fork("bag_0001");
    Rng b = Rng(123).fork("augment").fork(7).fork("bag_0001");
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("forking does not advance the parent stream") {
    Rng a(9);
    Rng b(9);
    (void)a.fork("child");
    (void)a.fork(3);
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct paths differ") {
    Rng root(42);
    std::set<std::uint64_t> firsts;
    firsts.insert(root.fork("a").next_u64());
    firsts.insert(root.fork("b").next_u64());
    firsts.insert(root.fork(0).next_u64());
    firsts.insert(root.fork(1).next_u64());
    firsts.insert(root.fork("a").fork(0).next_u64());
    CHECK(firsts.size() == 5);
}

TEST_CASE("uniform lands in [0,1) with sane mean") {
    Rng rng(7);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("uniform_int stays in range and hits every value") {
    Rng rng(11);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t v = rng.uniform_int(8);
        REQUIRE(v < 8);
        seen.insert(v);
    }
    CHECK(seen.size() == 8);
}

TEST_CASE("gaussian moments") {
    Rng rng(13);
    const int n = 50000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sq += g * g;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.03);
}

TEST_SUITE_END();
