#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "quantkit/error.hpp"
#include "quantkit/sampling.hpp"
#include "support.hpp"

using namespace quantkit;
using qk_test::count_positive;
using qk_test::make_labels;

namespace {

bool all_distinct(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) == v.end();
}

std::vector<std::size_t> of_class(const Labels& pool, const std::vector<std::size_t>& idx, Label y) {
    std::vector<std::size_t> out;
    for (auto i : idx)
        if (pool[i] == y) out.push_back(i);
    return out;
}

} // namespace

TEST_CASE("rng draws stay in range and are reproducible") {
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.below(7);
        CHECK(x < 7);
        CHECK(x == b.below(7));
        const double u = a.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(u == b.uniform());
    }
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(stable_hash("imdb") == stable_hash("imdb"));
    CHECK(stable_hash("imdb") != stable_hash("kindle"));
}

TEST_CASE("round_count rounds half away from zero") {
    CHECK(round_count(2.5) == 3);
    CHECK(round_count(0.6) == 1);
    CHECK(round_count(0.4) == 0);
    CHECK(SampleSpec{0.25, 10, 0}.positive_count() == 3);
    CHECK(SampleSpec{0.35, 10, 0}.positive_count() == 4);
}

TEST_CASE("generate_indices with both classes sufficient") {
    const auto pool = make_labels(100, 100);
    const auto s = generate_indices(pool, {0.3, 10, 7});
    REQUIRE(s.indices.size() == 10);
    CHECK(count_positive(pool, s.indices) == 3);
    CHECK(all_distinct(s.indices));
}

TEST_CASE("generate_indices at a boundary prevalence") {
    const auto pool = make_labels(100, 100);
    const auto s = generate_indices(pool, {1.0, 10, 7});
    REQUIRE(s.indices.size() == 10);
    CHECK(count_positive(pool, s.indices) == 10);
    CHECK(all_distinct(s.indices));
    const auto z = generate_indices(pool, {0.0, 10, 7});
    CHECK(count_positive(pool, z.indices) == 0);
}

TEST_CASE("generate_indices draws a short class with replacement") {
    const auto pool = make_labels(2, 100);
    const auto s = generate_indices(pool, {0.5, 10, 3});
    REQUIRE(s.indices.size() == 10);
    const auto pos = of_class(pool, s.indices, Label::Positive);
    const auto neg = of_class(pool, s.indices, Label::Negative);
    CHECK(pos.size() == 5);
    CHECK(neg.size() == 5);
    CHECK(std::set<std::size_t>(pos.begin(), pos.end()).size() <= 2);
    CHECK(all_distinct(neg));
}

TEST_CASE("generate_indices rejects a missing class") {
    const auto pool = make_labels(0, 10);
    CHECK_THROWS_WITH_AS(generate_indices(pool, {0.5, 10, 1}), doctest::Contains("class unavailable"),
                         Error);
    CHECK_NOTHROW(generate_indices(pool, {0.0, 10, 1}));
    CHECK_NOTHROW(generate_indices(pool, {0.04, 10, 1})); // rounds to 0 positives
    CHECK_THROWS_AS(generate_indices(pool, {0.06, 10, 1}), Error);
}

TEST_CASE("protocol sizes") {
    const auto pool = make_labels(600, 600);
    const auto val = protocol_samples(pool, ProtocolPlan::with_default_grid(10, 500, 1));
    const auto test = protocol_samples(pool, ProtocolPlan::with_default_grid(100, 500, 2));
    std::size_t n_val = 0, n_test = 0;
    for (const auto& p : val) n_val += p.samples.size();
    for (const auto& p : test) n_test += p.samples.size();
    CHECK(val.size() == 21);
    CHECK(n_val == 210);
    CHECK(n_test == 2100);
    CHECK(ProtocolPlan::with_default_grid(100, 500, 2).total_samples() == 2100);
}

TEST_CASE("protocol with a single grid point") {
    const auto pool = make_labels(10, 10);
    const auto pts = protocol_samples(pool, ProtocolPlan{{0.5}, 1, 4, 11});
    REQUIRE(pts.size() == 1);
    REQUIRE(pts[0].samples.size() == 1);
    CHECK(count_positive(pool, pts[0].samples[0].indices) == 2);
    CHECK(pts[0].samples[0].indices.size() == 4);
}

TEST_CASE("protocol plan validation") {
    CHECK_THROWS_AS((ProtocolPlan{{0.5, 0.5}, 1, 4, 0}.validate()), Error);
    CHECK_THROWS_AS((ProtocolPlan{{0.5, 1.2}, 1, 4, 0}.validate()), Error);
    CHECK_THROWS_AS((ProtocolPlan{{0.5}, 0, 4, 0}.validate()), Error);
    const auto grid = ProtocolPlan::default_grid();
    REQUIRE(grid.size() == 21);
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == 1.0);
}

TEST_CASE("realized prevalence is exact for every sample") {
    const auto pool = make_labels(137, 463);
    for (std::int64_t q : {7, 50, 100, 500}) {
        const auto pts = protocol_samples(pool, ProtocolPlan::with_default_grid(5, q, 42));
        for (const auto& p : pts)
            for (const auto& s : p.samples) {
                const auto want = round_count(p.prevalence * static_cast<double>(q));
                CHECK(static_cast<std::int64_t>(s.indices.size()) == q);
                CHECK(static_cast<std::int64_t>(count_positive(pool, s.indices)) == want);
                // Draws without replacement whenever the class is large enough.
                if (want <= 137 && q - want <= 463) CHECK(all_distinct(s.indices));
            }
    }
}

TEST_CASE("default grid gives integral counts at q=500") {
    for (double pi : ProtocolPlan::default_grid()) {
        const double x = pi * 500.0;
        CHECK(std::abs(x - std::round(x)) < 1e-9);
    }
}

TEST_CASE("protocol samples are deterministic across runs and threads") {
    const auto pool = make_labels(300, 200);
    const auto plan = ProtocolPlan::with_default_grid(4, 60, 2024);
    const auto first = protocol_samples(pool, plan);
    std::vector<std::vector<PrevalencePoint>> outs(4);
    {
        std::vector<std::jthread> threads;
        for (auto& o : outs) threads.emplace_back([&] { o = protocol_samples(pool, plan); });
    }
    for (const auto& o : outs) {
        REQUIRE(o.size() == first.size());
        for (std::size_t g = 0; g < o.size(); ++g)
            for (std::size_t s = 0; s < o[g].samples.size(); ++s)
                CHECK(o[g].samples[s].indices == first[g].samples[s].indices);
    }
    auto other = plan;
    other.master_seed = 2025;
    CHECK(protocol_samples(pool, other)[10].samples[0].indices != first[10].samples[0].indices);
}

TEST_CASE("stratified_split examples") {
    {
        const auto y = make_labels(90, 10);
        const auto s = stratified_split(y, 0.6, 5);
        CHECK(count_positive(y, s.train.indices) == 54);
        CHECK(s.train.indices.size() == 60);
        CHECK(count_positive(y, s.holdout.indices) == 36);
        CHECK(s.holdout.indices.size() == 40);
    }
    {
        const auto y = make_labels(10, 10);
        const auto s = stratified_split(y, 0.5, 5);
        CHECK(count_positive(y, s.train.indices) == 5);
        CHECK(s.train.indices.size() == 10);
        CHECK(count_positive(y, s.holdout.indices) == 5);
    }
    {
        const auto y = make_labels(3, 1);
        const auto s = stratified_split(y, 0.6, 5);
        CHECK(count_positive(y, s.train.indices) == 2);
        CHECK(s.train.indices.size() == 3);
        CHECK(count_positive(y, s.holdout.indices) == 1);
        CHECK(s.holdout.indices.size() == 1);
    }
    CHECK_THROWS_WITH_AS(stratified_split(make_labels(5, 0), 0.6, 1),
                         doctest::Contains("degenerate stratification"), Error);
}

TEST_CASE("stratified_split parts are disjoint, exhaustive and stratified") {
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t np = 1 + gen() % 200, nn = 1 + gen() % 200;
        Labels y = make_labels(np, nn);
        std::shuffle(y.begin(), y.end(), gen);
        const double frac = 0.1 + 0.8 * static_cast<double>(gen() % 1000) / 1000.0;
        const auto s = stratified_split(y, frac, gen());
        std::vector<std::size_t> all = s.train.indices;
        all.insert(all.end(), s.holdout.indices.begin(), s.holdout.indices.end());
        std::sort(all.begin(), all.end());
        REQUIRE(all.size() == y.size());
        for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
        const double pool_p = static_cast<double>(np) / static_cast<double>(y.size());
        for (const auto* part : {&s.train.indices, &s.holdout.indices}) {
            if (part->empty()) continue;
            const double p = static_cast<double>(count_positive(y, *part)) /
                             static_cast<double>(part->size());
            CHECK(std::abs(p - pool_p) <= 1.0 / static_cast<double>(part->size()) + 1e-12);
        }
    }
}
