#include "quantkit/prevalence.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "quantkit/error.hpp"

namespace quantkit {

namespace {

bool in_unit(double x, double tol) { return x >= -tol && x <= 1.0 + tol; }

double clamp_unit(double x) { return std::min(1.0, std::max(0.0, x)); }

} // namespace

PrevalenceVector::PrevalenceVector(double pos, double neg) {
    if (!std::isfinite(pos) || !std::isfinite(neg) || !in_unit(pos, kTolerance) ||
        !in_unit(neg, kTolerance) || std::abs(pos + neg - 1.0) > kTolerance) {
        throw Error("invalid prevalence vector (" + std::to_string(pos) + ", " +
                    std::to_string(neg) + ")");
    }
    pos_ = clamp_unit(pos);
    neg_ = clamp_unit(neg);
}

PrevalenceVector PrevalenceVector::from_positive(double pos) { return {pos, 1.0 - pos}; }

ClassRates::ClassRates(double tpr_, double fpr_) : tpr(tpr_), fpr(fpr_) {
    if (!std::isfinite(tpr) || !std::isfinite(fpr) || tpr < 0.0 || tpr > 1.0 || fpr < 0.0 ||
        fpr > 1.0) {
        throw Error("invalid class rates (" + std::to_string(tpr) + ", " + std::to_string(fpr) +
                    ")");
    }
}

PrevalenceVector prevalence_from_labels(std::span<const Label> labels) {
    if (labels.empty()) throw Error("empty sample");
    const auto n_pos = std::count(labels.begin(), labels.end(), Label::Positive);
    const double pos = static_cast<double>(n_pos) / static_cast<double>(labels.size());
    return PrevalenceVector::from_positive(pos);
}

PrevalenceVector smooth(const PrevalenceVector& p, double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw Error("smoothing factor must be positive");
    const double denom = 2.0 * eps + p.pos() + p.neg();
    const double pos = (eps + p.pos()) / denom;
    const double neg = (eps + p.neg()) / denom;
    return {pos, neg};
}

double absolute_error(const PrevalenceVector& p_true, const PrevalenceVector& p_hat) {
    return 0.5 * (std::abs(p_hat.pos() - p_true.pos()) + std::abs(p_hat.neg() - p_true.neg()));
}

double relative_absolute_error(const PrevalenceVector& p_true, const PrevalenceVector& p_hat,
                               std::int64_t test_size) {
    if (test_size < 1) throw Error("test size must be positive");
    const double eps = 1.0 / (2.0 * static_cast<double>(test_size));
    const auto st = smooth(p_true, eps);
    const auto sh = smooth(p_hat, eps);
    return 0.5 * (std::abs(sh.pos() - st.pos()) / st.pos() +
                  std::abs(sh.neg() - st.neg()) / st.neg());
}

PrevalenceVector clip_normalize(double raw_pos) {
    if (!std::isfinite(raw_pos)) throw Error("non-finite estimate");
    return PrevalenceVector::from_positive(clamp_unit(raw_pos));
}

} // namespace quantkit
