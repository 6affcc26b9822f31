#include "quantkit/ttest.hpp"

#include <cmath>
#include <limits>

#include "quantkit/error.hpp"

namespace quantkit {

namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxTerms = 10000;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxTerms; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return h;
    }
    throw Error("incomplete beta: continued fraction did not converge");
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete beta needs a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw Error("incomplete beta needs x in [0,1]");
    if (x == 0.0 || x == 1.0) return x;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    // The fraction converges fast for x < (a+1)/(a+b+2); use symmetry otherwise.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
    if (!(df > 0.0)) throw Error("degrees of freedom must be positive");
    if (std::isnan(t)) throw Error("t statistic is NaN");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

TTestVerdict paired_ttest(std::span<const double> errors_a, std::span<const double> errors_b) {
    if (errors_a.size() != errors_b.size()) throw Error("paired samples differ in length");
    const auto n = errors_a.size();
    if (n < 2) throw Error("paired t-test needs at least two pairs");

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += errors_a[i] - errors_b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = errors_a[i] - errors_b[i] - mean;
        ss += r * r;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TTestVerdict v;
    v.df = static_cast<double>(n - 1);
    if (sd == 0.0) {
        if (mean == 0.0) return v;
        v.degenerate = true;
        v.t = mean < 0.0 ? -std::numeric_limits<double>::infinity()
                         : std::numeric_limits<double>::infinity();
        v.p_value = 0.0;
    } else {
        v.t = mean / (sd / std::sqrt(static_cast<double>(n)));
        v.p_value = student_t_two_sided(v.t, v.df);
    }

    if (v.p_value >= kSignificance || mean == 0.0) return v;
    const bool strong = v.p_value < kStrongSignificance;
    if (mean < 0.0) {
        v.direction = Preference::FirstBetter;
        v.symbol = strong ? "≫" : ">";
    } else {
        v.direction = Preference::SecondBetter;
        v.symbol = strong ? "≪" : "<";
    }
    return v;
}

} // namespace quantkit
