#include "quantkit/selection.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "ascii.hpp"
#include "quantkit/error.hpp"

namespace quantkit {

std::string to_string(LossKind kind) {
    switch (kind) {
    case LossKind::AE: return "AE";
    case LossKind::RAE: return "RAE";
    case LossKind::ACCURACY: return "A";
    case LossKind::F1: return "F1";
    }
    return "?";
}

LossKind parse_loss(std::string_view name) {
    const auto upper = to_upper(name);
    if (upper == "AE") return LossKind::AE;
    if (upper == "RAE") return LossKind::RAE;
    if (upper == "A" || upper == "ACCURACY") return LossKind::ACCURACY;
    if (upper == "F1") return LossKind::F1;
    throw Error("unknown selection loss '" + std::string(name) + "'");
}

void ParamGrid::validate() const {
    if (configs.empty()) throw Error("empty parameter grid");
    for (const auto& c : configs) {
        if (c.kind != kind) throw Error("grid config does not match the grid's learner");
        c.validate();
    }
}

ParamGrid grid_for(LearnerKind kind) {
    ParamGrid grid{kind, {}};
    if (kind == LearnerKind::MNB) {
        for (int i = 0; i <= 20; ++i) grid.configs.push_back(LearnerConfig::naive_bayes(i * 0.05));
        return grid;
    }
    for (int e = -4; e <= 5; ++e) {
        for (bool balanced : {true, false}) {
            const double c = std::pow(10.0, e);
            grid.configs.push_back(kind == LearnerKind::LR ? LearnerConfig::logistic(c, balanced)
                                                           : LearnerConfig::linear_svm(c, balanced));
        }
    }
    return grid;
}

ParamGrid grid_for(std::string_view kind) { return grid_for(parse_learner(kind)); }

std::vector<LabelledSample> label_samples(const std::vector<PrevalencePoint>& points,
                                          std::span<const Label> pool_labels) {
    std::vector<LabelledSample> out;
    Labels buffer;
    for (std::size_t g = 0; g < points.size(); ++g) {
        for (std::size_t s = 0; s < points[g].samples.size(); ++s) {
            const auto& sample = points[g].samples[s];
            buffer.clear();
            for (auto i : sample.indices) buffer.push_back(pool_labels[i]);
            out.push_back({g, points[g].prevalence, s, sample, prevalence_from_labels(buffer)});
        }
    }
    return out;
}

std::uint64_t sample_set_fingerprint(const std::vector<LabelledSample>& samples) {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (const auto& s : samples) {
        h = splitmix64(h ^ s.grid_index);
        for (auto i : s.sample.indices) h = splitmix64(h ^ static_cast<std::uint64_t>(i));
    }
    return h;
}

double evaluate_quantification(const SampleQuantifier& quantify,
                               const std::vector<LabelledSample>& samples, LossKind loss,
                               std::vector<double>* per_sample) {
    if (samples.empty()) throw Error("no validation samples");
    if (loss != LossKind::AE && loss != LossKind::RAE)
        throw Error("quantification loss must be AE or RAE");
    if (per_sample) per_sample->clear();
    double sum = 0.0;
    for (const auto& s : samples) {
        const auto estimate = quantify(s.sample.indices);
        const double e =
            loss == LossKind::AE
                ? absolute_error(s.true_prevalence, estimate)
                : relative_absolute_error(s.true_prevalence, estimate,
                                          static_cast<std::int64_t>(s.sample.indices.size()));
        if (per_sample) per_sample->push_back(e);
        sum += e;
    }
    return sum / static_cast<double>(samples.size());
}

double accuracy(std::span<const std::uint8_t> predictions, std::span<const Label> labels) {
    if (predictions.size() != labels.size() || labels.empty())
        throw Error("predictions and labels must be nonempty and of equal length");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        correct += (predictions[i] == 1) == is_positive(labels[i]);
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double f1_score(std::span<const std::uint8_t> predictions, std::span<const Label> labels,
                Label relevant) {
    if (predictions.size() != labels.size() || labels.empty())
        throw Error("predictions and labels must be nonempty and of equal length");
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = (predictions[i] == 1) == is_positive(relevant);
        const bool actual = labels[i] == relevant;
        tp += predicted && actual;
        fp += predicted && !actual;
        fn += !predicted && actual;
    }
    const double denom = 2 * tp + fp + fn;
    return denom == 0.0 ? 0.0 : 2 * tp / denom;
}

Label minority_class(const PrevalenceVector& p) {
    return p.pos() < p.neg() ? Label::Positive : Label::Negative;
}

double evaluate_on_samples(const QuantifierModel& model, const SparseMatrix& pool_X,
                           std::span<const Label> pool_labels,
                           const std::vector<LabelledSample>& samples, SelectionLoss loss,
                           std::vector<double>* per_sample) {
    if (pool_X.rows() != pool_labels.size()) throw Error("pool rows and labels differ in length");
    if (loss.is_quantification()) {
        const auto pool = model.outputs(pool_X);
        return evaluate_quantification(
            [&](std::span<const std::size_t> s) { return model.quantify(pool, s); }, samples,
            loss.kind, per_sample);
    }
    if (!model.classifier()) throw Error("classification loss needs a classifier");
    if (per_sample) per_sample->clear();
    const auto predictions = model.classifier()->predictions(pool_X);
    if (loss.kind == LossKind::ACCURACY) return accuracy(predictions, pool_labels);
    return f1_score(predictions, pool_labels, minority_class(model.train_prevalence()));
}

std::size_t pick_winner(std::span<const double> scores, bool minimize) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) continue;
        if (!best || (minimize ? scores[i] < scores[*best] : scores[i] > scores[*best])) best = i;
    }
    if (!best) throw Error("no configuration produced a finite score");
    return *best;
}

GridOutcome run_grid(std::size_t n, const std::function<double(std::size_t)>& score, bool minimize,
                     int jobs) {
    GridOutcome out;
    out.scores.assign(n, NAN);
    out.failures.assign(n, "");
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out.scores[i] = score(i);
            } catch (const std::exception& e) {
                out.failures[i] = e.what();
            }
        }
    };
    const auto threads = static_cast<std::size_t>(std::max(1, jobs));
    if (threads == 1 || n < 2) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
    }
    try {
        out.winner = pick_winner(out.scores, minimize);
    } catch (const Error&) {
        std::string causes;
        for (std::size_t i = 0; i < n; ++i)
            causes += "\n  config " + std::to_string(i) + ": " + out.failures[i];
        throw Error("all configurations failed:" + causes);
    }
    return out;
}

SelectionResult select(MethodKind method, const ParamGrid& grid, const SparseMatrix& train_X,
                       std::span<const Label> train_y, const SparseMatrix& val_X,
                       std::span<const Label> val_y, const ProtocolPlan& plan, SelectionLoss loss,
                       const SelectOptions& options) {
    grid.validate();
    const auto p = prevalence_from_labels(train_y);
    if (p.pos() == 0.0 || p.neg() == 0.0) throw Error("training part must contain both classes");

    const auto samples = label_samples(protocol_samples(val_y, plan), val_y);
    const auto fingerprint = sample_set_fingerprint(samples);
    const auto n = grid.configs.size();

    std::vector<std::optional<QuantifierModel>> models(n);
    std::vector<std::vector<double>> traces(n);
    std::vector<std::uint64_t> fingerprints(n, 0);
    auto outcome = run_grid(
        n,
        [&](std::size_t i) {
            auto model = QuantifierModel::fit(method, train_X, train_y, grid.configs[i], options.fit);
            const double value = evaluate_on_samples(model, val_X, val_y, samples, loss, &traces[i]);
            fingerprints[i] = fingerprint;
            models[i] = std::move(model);
            return value;
        },
        loss.minimize(), options.jobs);

    SelectionReport report{method,
                           loss,
                           grid.configs,
                           std::move(outcome.scores),
                           std::move(traces),
                           std::move(outcome.failures),
                           std::move(fingerprints),
                           outcome.winner,
                           plan.master_seed,
                           options.fit.seed,
                           train_y.size(),
                           val_y.size(),
                           options.fit.inner_train_fraction,
                           samples.size()};
    return {std::move(*models[outcome.winner]), std::move(report)};
}

} // namespace quantkit
