#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quantkit/prevalence.hpp"
#include "quantkit/text.hpp"

namespace quantkit {

enum class LearnerKind { LR, MNB, LSVM };

std::string to_string(LearnerKind kind);
LearnerKind parse_learner(std::string_view name);

/// Hyperparameters of one learner. Only the fields meaningful for the kind
/// are engaged: c and balanced for LR/LSVM, alpha for MNB.
struct LearnerConfig {
    LearnerKind kind = LearnerKind::LR;
    std::optional<double> c;
    std::optional<bool> balanced;
    std::optional<double> alpha;

    static LearnerConfig logistic(double c, bool balanced = false);
    static LearnerConfig linear_svm(double c, bool balanced = false);
    static LearnerConfig naive_bayes(double alpha);

    void validate() const;
    std::string describe() const;
    bool operator==(const LearnerConfig&) const = default;
};

struct ClassWeights {
    double pos;
    double neg;
};

/// Balanced: J+ = p-(L)/p+(L), J- = 1. Unbalanced: both 1. Balanced mode
/// rejects a training prevalence with a zero component.
ClassWeights class_weights(const PrevalenceVector& train_prevalence, bool balanced);

/// Sigmoid map posterior = 1 / (1 + exp(a * score + b)).
struct CalibrationMap {
    double a = 0.0;
    double b = 0.0;

    double operator()(double score) const;
};

struct TrainingInfo {
    std::int64_t iterations = 0;
    bool converged = true;
    double gradient_norm = 0.0;
    double objective = 0.0;
    std::size_t train_documents = 0;
};

/// A trained binary classifier. Immutable after training; all prediction
/// methods are const and safe to call concurrently.
class Classifier {
public:
    enum class Kind { Logistic, NaiveBayes, LinearSvm };

    Kind kind() const { return kind_; }
    /// True when posterior() is available (LR, MNB, calibrated SVM).
    bool is_soft() const;

    /// Raw decision value: the linear margin for LR/LSVM, the log posterior
    /// odds for MNB. Hard prediction is decision > 0.
    double decision(SparseRowView x) const;
    double posterior(SparseRowView x) const;
    bool predict(SparseRowView x) const { return decision(x) > 0.0; }

    std::vector<double> decisions(const SparseMatrix& X) const;
    std::vector<double> posteriors(const SparseMatrix& X) const;
    std::vector<std::uint8_t> predictions(const SparseMatrix& X) const;

    std::span<const double> weights() const { return weights_; }
    double bias() const { return bias_; }
    const std::optional<CalibrationMap>& calibration() const { return calibration_; }
    const TrainingInfo& info() const { return info_; }

    Classifier with_calibration(CalibrationMap map) const;

private:
    friend Classifier train_logistic(const SparseMatrix&, std::span<const Label>,
                                     const LearnerConfig&);
    friend Classifier train_linear_svm(const SparseMatrix&, std::span<const Label>,
                                       const LearnerConfig&);
    friend Classifier train_mnb(const SparseMatrix&, std::span<const Label>,
                                const LearnerConfig&);

    Kind kind_ = Kind::Logistic;
    std::vector<double> weights_;
    double bias_ = 0.0;
    // Naive Bayes: per-feature log likelihoods and log priors per class.
    std::vector<double> log_theta_pos_, log_theta_neg_;
    double log_prior_pos_ = 0.0, log_prior_neg_ = 0.0;
    std::optional<CalibrationMap> calibration_;
    TrainingInfo info_;
};

inline constexpr std::int64_t kMaxIterations = 1000;
inline constexpr double kGradientTolerance = 1e-6;
/// Floor applied to each per-class log joint likelihood in naive Bayes.
inline constexpr double kLogJointFloor = -745.0;

/// L2-regularised logistic regression:
///   min 1/2 |w|^2 + C sum_i J_{y_i} log(1 + exp(-y_i (w.x_i + b)))
/// The bias is not regularised.
Classifier train_logistic(const SparseMatrix& X, std::span<const Label> y,
                          const LearnerConfig& config);

/// Linear SVM, squared hinge in the primal:
///   min 1/2 |w|^2 + C sum_i J_{y_i} max(0, 1 - y_i (w.x_i + b))^2
Classifier train_linear_svm(const SparseMatrix& X, std::span<const Label> y,
                            const LearnerConfig& config);

/// Multinomial naive Bayes with additive smoothing alpha and empirical priors.
Classifier train_mnb(const SparseMatrix& X, std::span<const Label> y, const LearnerConfig& config);

/// Dispatches on config.kind. LSVM models come back Platt-calibrated on
/// their own training scores when both classes are present.
Classifier train_classifier(const SparseMatrix& X, std::span<const Label> y,
                            const LearnerConfig& config);

/// Platt scaling with smoothed targets t+ = (N+ + 1)/(N+ + 2), t- = 1/(N- + 2).
CalibrationMap platt_calibrate(std::span<const double> scores, std::span<const Label> labels);

/// Negative log-likelihood minimised by platt_calibrate.
double platt_objective(std::span<const double> scores, std::span<const Label> labels,
                       const CalibrationMap& map);

ClassRates estimate_rates_hard(std::span<const std::uint8_t> predictions,
                               std::span<const Label> labels);
ClassRates estimate_rates_soft(std::span<const double> posteriors, std::span<const Label> labels);

// Minimiser shared by the linear learners; exposed for testing.
struct MinimizeResult {
    std::vector<double> x;
    double value = 0.0;
    double gradient_norm = 0.0;
    std::int64_t iterations = 0;
    bool converged = false;
};

using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Limited-memory BFGS with Armijo backtracking.
MinimizeResult minimize_lbfgs(const Objective& f, std::vector<double> x0,
                              std::int64_t max_iterations = kMaxIterations,
                              double gradient_tolerance = kGradientTolerance);

} // namespace quantkit
