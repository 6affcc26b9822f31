#pragma once

#include <span>
#include <string>

namespace quantkit {

/// Regularised incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Two-sided tail probability P(|T| >= |t|) of Student's t with df degrees.
double student_t_two_sided(double t, double df);

enum class Preference { FirstBetter, SecondBetter, Neither };

struct TTestVerdict {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;
    /// One of "≫", ">", "~", "<", "≪" (first vs second).
    std::string symbol = "~";
    Preference direction = Preference::Neither;
    /// Zero spread of the differences with a nonzero mean.
    bool degenerate = false;
};

inline constexpr double kStrongSignificance = 0.001;
inline constexpr double kSignificance = 0.05;

/// Paired two-sided t-test on error scores a[i] vs b[i]. Lower error is
/// better, so a negative mean difference a - b favours the first sequence.
TTestVerdict paired_ttest(std::span<const double> errors_a, std::span<const double> errors_b);

} // namespace quantkit
