#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "quantkit/error.hpp"
#include "quantkit/prevalence.hpp"
#include "support.hpp"

using namespace quantkit;
using qk_test::from_bits;

namespace {

// Direct evaluation of the smoothed relative error, written out per class.
double rae_oracle(double p, double phat, long size) {
    const double eps = 1.0 / (2.0 * static_cast<double>(size));
    const double sp = (eps + p) / (2.0 * eps + 1.0);
    const double sn = (eps + 1.0 - p) / (2.0 * eps + 1.0);
    const double hp = (eps + phat) / (2.0 * eps + 1.0);
    const double hn = (eps + 1.0 - phat) / (2.0 * eps + 1.0);
    return 0.5 * (std::abs(hp - sp) / sp + std::abs(hn - sn) / sn);
}

} // namespace

TEST_CASE("prevalence vector validates its components") {
    CHECK_NOTHROW(PrevalenceVector(0.3, 0.7));
    CHECK_THROWS_AS(PrevalenceVector(0.3, 0.6), Error);
    CHECK_THROWS_AS(PrevalenceVector(-0.1, 1.1), Error);
    CHECK_THROWS_AS(PrevalenceVector(std::nan(""), 1.0), Error);
    CHECK(PrevalenceVector::from_positive(0.25).neg() == doctest::Approx(0.75));
    CHECK_THROWS_AS(ClassRates(1.2, 0.0), Error);
    CHECK_NOTHROW(ClassRates(0.0, 1.0));
}

TEST_CASE("prevalence_from_labels") {
    auto a = prevalence_from_labels(from_bits({1, 1, 0, 0}));
    CHECK(a.pos() == 0.5);
    CHECK(a.neg() == 0.5);
    auto b = prevalence_from_labels(from_bits({1, 1, 1, 0}));
    CHECK(b.pos() == 0.75);
    CHECK(b.neg() == 0.25);
    auto c = prevalence_from_labels(from_bits({0, 0}));
    CHECK(c.pos() == 0.0);
    CHECK(c.neg() == 1.0);
    Labels empty;
    CHECK_THROWS_WITH_AS(prevalence_from_labels(empty), doctest::Contains("empty sample"), Error);
}

TEST_CASE("smooth") {
    auto s = smooth({0.5, 0.5}, 0.001);
    CHECK(s.pos() == doctest::Approx(0.5).epsilon(1e-12));
    auto lo = smooth({0.0, 1.0}, 0.001);
    CHECK(lo.pos() == doctest::Approx(0.001 / 1.002).epsilon(1e-12));
    CHECK(lo.neg() == doctest::Approx(1.001 / 1.002).epsilon(1e-12));
    CHECK(lo.pos() == doctest::Approx(0.000998).epsilon(1e-3));
    auto hi = smooth({1.0, 0.0}, 0.001);
    CHECK(hi.pos() == doctest::Approx(0.999002).epsilon(1e-6));
    CHECK(hi.neg() == doctest::Approx(0.000998).epsilon(1e-3));
    CHECK_THROWS_AS(smooth({0.5, 0.5}, 0.0), Error);
}

TEST_CASE("absolute_error") {
    CHECK(absolute_error({0.5, 0.5}, {0.5, 0.5}) == 0.0);
    CHECK(absolute_error({0.8, 0.2}, {0.6, 0.4}) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(absolute_error({1.0, 0.0}, {0.0, 1.0}) == 1.0);
}

TEST_CASE("relative_absolute_error") {
    CHECK(relative_absolute_error({0.5, 0.5}, {0.5, 0.5}, 500) == 0.0);
    CHECK(relative_absolute_error({0.5, 0.5}, {0.4, 0.6}, 500) ==
          doctest::Approx(0.19960).epsilon(1e-4));
    CHECK(relative_absolute_error({1.0, 0.0}, {0.9, 0.1}, 500) ==
          doctest::Approx(50.05).epsilon(1e-4));
    // Smoothing applies even when neither prevalence is zero.
    CHECK(relative_absolute_error({0.5, 0.5}, {0.4, 0.6}, 500) != doctest::Approx(0.2));
    CHECK_THROWS_AS(relative_absolute_error({0.5, 0.5}, {0.5, 0.5}, 0), Error);
}

TEST_CASE("clip_normalize") {
    CHECK(clip_normalize(0.6).pos() == 0.6);
    CHECK(clip_normalize(0.6).neg() == doctest::Approx(0.4));
    CHECK(clip_normalize(-0.1667) == PrevalenceVector(0.0, 1.0));
    CHECK(clip_normalize(1.2) == PrevalenceVector(1.0, 0.0));
    CHECK_THROWS_WITH_AS(clip_normalize(std::numeric_limits<double>::infinity()),
                         doctest::Contains("non-finite estimate"), Error);
    CHECK_THROWS_AS(clip_normalize(std::nan("")), Error);
}

TEST_CASE("error measures: properties over random pairs") {
    std::mt19937_64 gen(12345);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<long> size(1, 5000);
    for (int i = 0; i < 1000; ++i) {
        const double p = i % 50 == 0 ? 0.0 : (i % 50 == 1 ? 1.0 : u(gen));
        const double q = u(gen);
        const auto a = PrevalenceVector::from_positive(p);
        const auto b = PrevalenceVector::from_positive(q);
        const double ae = absolute_error(a, b);
        CHECK(ae >= 0.0);
        CHECK(ae <= 1.0);
        CHECK(ae == absolute_error(b, a));
        CHECK(absolute_error(a, a) == 0.0);
        CHECK(std::abs(ae - std::abs(q - p)) <= 1e-12);

        const long n = size(gen);
        const double rae = relative_absolute_error(a, b, n);
        CHECK(std::isfinite(rae));
        CHECK(std::abs(rae - rae_oracle(p, q, n)) <= 1e-12 * std::max(1.0, rae));

        const double eps = 1.0 / (2.0 * static_cast<double>(n));
        const auto s = smooth(a, eps);
        CHECK(s.pos() > 0.0);
        CHECK(s.neg() > 0.0);
        CHECK(std::abs(s.pos() + s.neg() - 1.0) <= 1e-12);

        const double raw = 3.0 * u(gen) - 1.0;
        const auto once = clip_normalize(raw);
        CHECK(clip_normalize(once.pos()) == once);
    }
}
