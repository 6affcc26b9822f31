#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace quantkit {

enum class Label : std::uint8_t { Negative = 0, Positive = 1 };

using Labels = std::vector<Label>;

inline bool is_positive(Label l) { return l == Label::Positive; }

/// Prevalence of the positive and negative class in a sample. Both components
/// are stored; construction validates that they lie in [0,1] and sum to 1.
class PrevalenceVector {
public:
    static constexpr double kTolerance = 1e-9;

    /// Validates (pos, neg); throws quantkit::Error on an invalid pair.
    PrevalenceVector(double pos, double neg);

    static PrevalenceVector from_positive(double pos);

    double pos() const { return pos_; }
    double neg() const { return neg_; }
    double operator[](Label y) const { return is_positive(y) ? pos_ : neg_; }

    bool operator==(const PrevalenceVector&) const = default;

private:
    double pos_;
    double neg_;
};

struct ClassRates {
    double tpr;
    double fpr;

    ClassRates(double tpr, double fpr);
};

PrevalenceVector prevalence_from_labels(std::span<const Label> labels);

/// Additive smoothing: (eps + p(y)) / (2 eps + sum p).
PrevalenceVector smooth(const PrevalenceVector& p, double eps);

/// Mean absolute difference over the two classes.
double absolute_error(const PrevalenceVector& p_true, const PrevalenceVector& p_hat);

/// Mean relative absolute difference. Both vectors are smoothed with
/// eps = 1/(2 * test_size) before dividing, whatever their values.
double relative_absolute_error(const PrevalenceVector& p_true, const PrevalenceVector& p_hat,
                               std::int64_t test_size);

/// Clips a raw positive-class estimate into [0,1]; rejects NaN and infinities.
PrevalenceVector clip_normalize(double raw_pos);

} // namespace quantkit
