#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quantkit/learners.hpp"
#include "quantkit/quantifiers.hpp"
#include "quantkit/sampling.hpp"

namespace quantkit {

enum class LossKind { AE, RAE, ACCURACY, F1 };

std::string to_string(LossKind kind);
LossKind parse_loss(std::string_view name);

struct SelectionLoss {
    LossKind kind = LossKind::AE;

    bool minimize() const { return kind == LossKind::AE || kind == LossKind::RAE; }
    bool is_quantification() const { return minimize(); }
};

struct ParamGrid {
    LearnerKind kind;
    std::vector<LearnerConfig> configs;

    void validate() const;
};

/// LR/LSVM: C in {1e-4, ..., 1e5} x balanced in {true, false}.
/// MNB: alpha in {0, 0.05, ..., 1}.
ParamGrid grid_for(LearnerKind kind);
ParamGrid grid_for(std::string_view kind);

/// One protocol sample with its true prevalence, flattened out of the grid.
struct LabelledSample {
    std::size_t grid_index;
    double grid_prevalence;
    std::size_t sample_id;
    SampleIndex sample;
    PrevalenceVector true_prevalence;
};

std::vector<LabelledSample> label_samples(const std::vector<PrevalencePoint>& points,
                                          std::span<const Label> pool_labels);

/// Fingerprint of the exact index lists of a sample set.
std::uint64_t sample_set_fingerprint(const std::vector<LabelledSample>& samples);

using SampleQuantifier = std::function<PrevalenceVector(std::span<const std::size_t>)>;

/// Mean AE or RAE of a quantifier over the samples. RAE smooths with
/// eps = 1/(2 |sample|). Per-sample errors go to `per_sample` when given.
double evaluate_quantification(const SampleQuantifier& quantify,
                               const std::vector<LabelledSample>& samples, LossKind loss,
                               std::vector<double>* per_sample = nullptr);

double accuracy(std::span<const std::uint8_t> predictions, std::span<const Label> labels);
/// F1 with the given class treated as the relevant one.
double f1_score(std::span<const std::uint8_t> predictions, std::span<const Label> labels,
                Label relevant);
/// The class with the smaller prevalence; negative on ties.
Label minority_class(const PrevalenceVector& p);

/// Scores a fitted model. Quantification losses quantify every sample;
/// ACCURACY and F1 score the classifier once over all pool documents, F1 on
/// the minority class of the model's training data.
double evaluate_on_samples(const QuantifierModel& model, const SparseMatrix& pool_X,
                           std::span<const Label> pool_labels,
                           const std::vector<LabelledSample>& samples, SelectionLoss loss,
                           std::vector<double>* per_sample = nullptr);

/// Index of the best finite score; the lowest index wins ties. Throws when no
/// score is finite.
std::size_t pick_winner(std::span<const double> scores, bool minimize);

/// Evaluates `score(i)` for i in [0, n), possibly on several threads, and
/// gathers results by index. A throwing evaluation is recorded as NaN with
/// its message in `failures[i]`.
struct GridOutcome {
    std::vector<double> scores;
    std::vector<std::string> failures;
    std::size_t winner = 0;
};

GridOutcome run_grid(std::size_t n, const std::function<double(std::size_t)>& score, bool minimize,
                     int jobs = 1);

struct SelectionReport {
    MethodKind method;
    SelectionLoss loss;
    std::vector<LearnerConfig> configs;
    std::vector<double> mean_losses;
    std::vector<std::vector<double>> per_sample_losses;
    std::vector<std::string> failures;
    std::vector<std::uint64_t> sample_fingerprints;
    std::size_t winner = 0;
    std::uint64_t validation_seed = 0;
    std::uint64_t inner_split_seed = 0;
    std::size_t train_documents = 0;
    std::size_t validation_documents = 0;
    double inner_train_fraction = 0.0;
    std::size_t validation_samples = 0;
};

struct SelectionResult {
    QuantifierModel model;
    SelectionReport report;
};

struct SelectOptions {
    FitOptions fit;
    int jobs = 1;
};

/// Grid search: validation samples are drawn once from the validation part
/// and shared by every config; each config is fitted on the training part
/// (inner split inside fit for Case 1 methods) and scored; the best mean
/// wins, lowest grid index on ties.
SelectionResult select(MethodKind method, const ParamGrid& grid, const SparseMatrix& train_X,
                       std::span<const Label> train_y, const SparseMatrix& val_X,
                       std::span<const Label> val_y, const ProtocolPlan& plan, SelectionLoss loss,
                       const SelectOptions& options = {});

} // namespace quantkit
