#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quantkit/learners.hpp"
#include "quantkit/prevalence.hpp"
#include "quantkit/text.hpp"

namespace quantkit {

enum class MethodKind { CC, PCC, ACC, PACC, EMQ, HDy, MLPE };

std::string to_string(MethodKind kind);
MethodKind parse_method(std::string_view name);

/// Methods that estimate their own parameters on a held-out part of the
/// training data (ACC, PACC, HDy).
bool has_estimated_parameters(MethodKind kind);
bool needs_posteriors(MethodKind kind);
bool needs_classifier(MethodKind kind);

struct EmqSettings {
    double tolerance = 1e-6;
    std::int64_t max_iterations = 1000;

    void validate() const;
};

struct HdySettings {
    std::vector<int> bin_counts{10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110};
    double alpha_grid_step = 0.01;

    void validate() const;
    /// Number of intervals in the alpha grid, i.e. round(1 / step).
    int grid_intervals() const;
};

PrevalenceVector cc_quantify(std::span<const std::uint8_t> hard_predictions);
PrevalenceVector pcc_quantify(std::span<const double> posteriors);

/// Minimum |tpr - fpr| accepted by the adjusted methods.
inline constexpr double kMinRateGap = 1e-6;

/// (p_cc - fpr) / (tpr - fpr), clipped into [0,1].
PrevalenceVector acc_quantify(const PrevalenceVector& cc_estimate, const ClassRates& rates);
PrevalenceVector pacc_quantify(const PrevalenceVector& pcc_estimate, const ClassRates& soft_rates);

struct EmqResult {
    PrevalenceVector prevalence;
    std::int64_t iterations;
    bool converged;
    /// Max-norm change of the prior in the final iteration.
    double last_step;
};

/// Prior re-estimation by EM: posteriors are rescaled by current/training
/// prior per class, renormalised per document, and the new prior is their mean.
EmqResult emq_run(std::span<const double> test_posteriors, const PrevalenceVector& train_prevalence,
                  const EmqSettings& settings = {});
PrevalenceVector emq_quantify(std::span<const double> test_posteriors,
                              const PrevalenceVector& train_prevalence,
                              const EmqSettings& settings = {});

/// Histogram of values in [0,1] over `bins` equal-width bins, normalised to sum 1.
std::vector<double> posterior_histogram(std::span<const double> values, int bins);
double hellinger_distance(std::span<const double> p, std::span<const double> q);

/// Alpha in {0, 1/k, ..., 1} minimising HD(alpha*pos + (1-alpha)*neg, test);
/// ties go to the smallest alpha.
double hdy_best_alpha(std::span<const double> pos_hist, std::span<const double> neg_hist,
                      std::span<const double> test_hist, int grid_intervals);

/// Median over the configured bin counts of the per-count best alpha.
PrevalenceVector hdy_quantify(std::span<const double> val_pos_posteriors,
                              std::span<const double> val_neg_posteriors,
                              std::span<const double> test_posteriors,
                              const HdySettings& settings = {});

PrevalenceVector mlpe_quantify(const PrevalenceVector& train_prevalence);

struct FitOptions {
    /// Fraction of the training part kept for the classifier when the method
    /// estimates its own parameters; the remainder estimates them.
    double inner_train_fraction = 0.6;
    std::uint64_t seed = 0;
    EmqSettings emq;
    HdySettings hdy;
};

/// Per-document classifier outputs over a pool of documents. Only the fields
/// the method consumes are filled.
struct ClassifierOutputs {
    std::vector<std::uint8_t> predictions;
    std::vector<double> posteriors;
};

/// A fitted quantification method. Immutable after fit().
class QuantifierModel {
public:
    /// Case 2 methods (CC, PCC, EMQ) train on the whole part. Case 1 methods
    /// (ACC, PACC, HDy) split it, train on the inner train part only and
    /// estimate their parameters on the inner validation part. MLPE stores
    /// the training prevalence and ignores the learner.
    static QuantifierModel fit(MethodKind method, const SparseMatrix& X, std::span<const Label> y,
                               const LearnerConfig& config, const FitOptions& options = {});

    MethodKind method() const { return method_; }
    const Classifier* classifier() const { return classifier_.get(); }
    const PrevalenceVector& train_prevalence() const { return train_prevalence_; }
    const std::optional<ClassRates>& rates() const { return rates_; }
    std::size_t classifier_train_documents() const;

    ClassifierOutputs outputs(const SparseMatrix& X) const;
    /// Quantifies the sample made of the given positions of a precomputed pool.
    PrevalenceVector quantify(const ClassifierOutputs& pool, std::span<const std::size_t> sample) const;
    /// Quantifies all rows of X as one sample.
    PrevalenceVector quantify(const SparseMatrix& X) const;

private:
    QuantifierModel(MethodKind method, PrevalenceVector train_prevalence)
        : method_(method), train_prevalence_(train_prevalence) {}

    PrevalenceVector quantify_outputs(std::span<const std::uint8_t> predictions,
                                      std::span<const double> posteriors) const;

    MethodKind method_;
    PrevalenceVector train_prevalence_;
    std::shared_ptr<const Classifier> classifier_;
    std::optional<ClassRates> rates_;
    std::vector<double> hdy_pos_, hdy_neg_;
    EmqSettings emq_;
    HdySettings hdy_;
};

} // namespace quantkit
