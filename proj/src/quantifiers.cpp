#include "quantkit/quantifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ascii.hpp"
#include "quantkit/error.hpp"
#include "quantkit/sampling.hpp"

namespace quantkit {

std::string to_string(MethodKind kind) {
    switch (kind) {
    case MethodKind::CC: return "CC";
    case MethodKind::PCC: return "PCC";
    case MethodKind::ACC: return "ACC";
    case MethodKind::PACC: return "PACC";
    case MethodKind::EMQ: return "EMQ";
    case MethodKind::HDy: return "HDy";
    case MethodKind::MLPE: return "MLPE";
    }
    return "?";
}

MethodKind parse_method(std::string_view name) {
    for (auto k : {MethodKind::CC, MethodKind::PCC, MethodKind::ACC, MethodKind::PACC,
                   MethodKind::EMQ, MethodKind::HDy, MethodKind::MLPE}) {
        if (to_upper(to_string(k)) == to_upper(name)) return k;
    }
    throw Error("unknown method '" + std::string(name) + "'");
}

bool has_estimated_parameters(MethodKind kind) {
    return kind == MethodKind::ACC || kind == MethodKind::PACC || kind == MethodKind::HDy;
}

bool needs_posteriors(MethodKind kind) {
    return kind == MethodKind::PCC || kind == MethodKind::PACC || kind == MethodKind::EMQ ||
           kind == MethodKind::HDy;
}

bool needs_classifier(MethodKind kind) { return kind != MethodKind::MLPE; }

void EmqSettings::validate() const {
    if (!(tolerance > 0.0)) throw Error("EM tolerance must be positive");
    if (max_iterations < 1) throw Error("EM iteration cap must be at least 1");
}

int HdySettings::grid_intervals() const {
    return static_cast<int>(std::lround(1.0 / alpha_grid_step));
}

void HdySettings::validate() const {
    if (bin_counts.empty()) throw Error("HDy needs at least one bin count");
    for (int b : bin_counts)
        if (b < 1) throw Error("HDy bin counts must be positive");
    if (!(alpha_grid_step > 0.0 && alpha_grid_step < 1.0))
        throw Error("HDy grid step must lie in (0,1)");
    if (std::abs(1.0 / alpha_grid_step - grid_intervals()) > 1e-9)
        throw Error("HDy grid step must divide 1 evenly");
}

PrevalenceVector cc_quantify(std::span<const std::uint8_t> hard_predictions) {
    if (hard_predictions.empty()) throw Error("empty sample");
    std::size_t ones = 0;
    for (auto p : hard_predictions) {
        if (p > 1) throw Error("hard predictions must be 0 or 1");
        ones += p;
    }
    return PrevalenceVector::from_positive(static_cast<double>(ones) /
                                           static_cast<double>(hard_predictions.size()));
}

PrevalenceVector pcc_quantify(std::span<const double> posteriors) {
    if (posteriors.empty()) throw Error("empty sample");
    double sum = 0.0;
    for (double p : posteriors) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error("posterior outside [0,1]");
        sum += p;
    }
    return PrevalenceVector::from_positive(std::min(1.0, sum / static_cast<double>(posteriors.size())));
}

namespace {

PrevalenceVector adjust(const PrevalenceVector& estimate, const ClassRates& rates) {
    const double gap = rates.tpr - rates.fpr;
    if (std::abs(gap) < kMinRateGap) throw Error("unadjustable: degenerate rates");
    return clip_normalize((estimate.pos() - rates.fpr) / gap);
}

} // namespace

PrevalenceVector acc_quantify(const PrevalenceVector& cc_estimate, const ClassRates& rates) {
    return adjust(cc_estimate, rates);
}

PrevalenceVector pacc_quantify(const PrevalenceVector& pcc_estimate, const ClassRates& soft_rates) {
    return adjust(pcc_estimate, soft_rates);
}

EmqResult emq_run(std::span<const double> test_posteriors, const PrevalenceVector& train_prevalence,
                  const EmqSettings& settings) {
    settings.validate();
    if (test_posteriors.empty()) throw Error("empty sample");
    if (train_prevalence.pos() <= 0.0 || train_prevalence.neg() <= 0.0)
        throw Error("EM undefined at zero prior");
    for (double p : test_posteriors)
        if (!(p >= 0.0 && p <= 1.0)) throw Error("posterior outside [0,1]");

    const double p0_pos = train_prevalence.pos(), p0_neg = train_prevalence.neg();
    double prior_pos = p0_pos, prior_neg = p0_neg;
    const double n = static_cast<double>(test_posteriors.size());

    EmqResult result{train_prevalence, 0, false, 0.0};
    while (result.iterations < settings.max_iterations) {
        const double ratio_pos = prior_pos / p0_pos, ratio_neg = prior_neg / p0_neg;
        // Neumaier summation keeps fixed points exact over long samples.
        double sum_pos = 0.0, carry = 0.0;
        for (double s : test_posteriors) {
            const double wp = ratio_pos * s, wn = ratio_neg * (1.0 - s);
            const double z = wp + wn;
            // z == 0 only when both reweighted masses vanish; keep the document neutral.
            const double term = z > 0.0 ? wp / z : prior_pos;
            const double t = sum_pos + term;
            carry += std::abs(sum_pos) >= std::abs(term) ? (sum_pos - t) + term : (term - t) + sum_pos;
            sum_pos = t;
        }
        const double next_pos = std::clamp((sum_pos + carry) / n, 0.0, 1.0);
        const double next_neg = 1.0 - next_pos;
        result.last_step = std::max(std::abs(next_pos - prior_pos), std::abs(next_neg - prior_neg));
        prior_pos = next_pos;
        prior_neg = next_neg;
        ++result.iterations;
        if (result.last_step < settings.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.prevalence = PrevalenceVector(prior_pos, prior_neg);
    return result;
}

PrevalenceVector emq_quantify(std::span<const double> test_posteriors,
                              const PrevalenceVector& train_prevalence,
                              const EmqSettings& settings) {
    return emq_run(test_posteriors, train_prevalence, settings).prevalence;
}

std::vector<double> posterior_histogram(std::span<const double> values, int bins) {
    if (bins < 1) throw Error("bin count must be positive");
    if (values.empty()) throw Error("empty pool");
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error("posterior outside [0,1]");
        const auto b = std::min(static_cast<int>(v * bins), bins - 1);
        h[static_cast<std::size_t>(b)] += 1.0;
    }
    const double n = static_cast<double>(values.size());
    for (auto& x : h) x /= n;
    return h;
}

double hellinger_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw Error("histograms differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

double hdy_best_alpha(std::span<const double> pos_hist, std::span<const double> neg_hist,
                      std::span<const double> test_hist, int grid_intervals) {
    // Distances closer than this count as ties.
    constexpr double kTie = 1e-12;
    std::vector<double> mix(pos_hist.size());
    double best_alpha = 0.0;
    double best = INFINITY;
    for (int i = 0; i <= grid_intervals; ++i) {
        const double alpha = static_cast<double>(i) / grid_intervals;
        for (std::size_t k = 0; k < mix.size(); ++k)
            mix[k] = alpha * pos_hist[k] + (1.0 - alpha) * neg_hist[k];
        const double d = hellinger_distance(mix, test_hist);
        if (d < best - kTie) {
            best = d;
            best_alpha = alpha;
        }
    }
    return best_alpha;
}

PrevalenceVector hdy_quantify(std::span<const double> val_pos_posteriors,
                              std::span<const double> val_neg_posteriors,
                              std::span<const double> test_posteriors,
                              const HdySettings& settings) {
    settings.validate();
    if (val_pos_posteriors.empty() || val_neg_posteriors.empty() || test_posteriors.empty())
        throw Error("empty pool");
    std::vector<double> argmins;
    for (int bins : settings.bin_counts) {
        const auto hp = posterior_histogram(val_pos_posteriors, bins);
        const auto hn = posterior_histogram(val_neg_posteriors, bins);
        const auto ht = posterior_histogram(test_posteriors, bins);
        argmins.push_back(hdy_best_alpha(hp, hn, ht, settings.grid_intervals()));
    }
    std::sort(argmins.begin(), argmins.end());
    const std::size_t m = argmins.size();
    const double median = m % 2 == 1 ? argmins[m / 2] : 0.5 * (argmins[m / 2 - 1] + argmins[m / 2]);
    return clip_normalize(median);
}

PrevalenceVector mlpe_quantify(const PrevalenceVector& train_prevalence) { return train_prevalence; }

QuantifierModel QuantifierModel::fit(MethodKind method, const SparseMatrix& X,
                                     std::span<const Label> y, const LearnerConfig& config,
                                     const FitOptions& options) {
    if (X.rows() != y.size()) throw Error("feature rows and labels differ in length");
    const auto prevalence = prevalence_from_labels(y);
    QuantifierModel model(method, prevalence);
    model.emq_ = options.emq;
    model.hdy_ = options.hdy;
    if (method == MethodKind::MLPE) return model;

    if (prevalence.pos() == 0.0 || prevalence.neg() == 0.0)
        throw Error("training part must contain both classes");
    options.emq.validate();
    options.hdy.validate();

    auto require_soft = [&](const Classifier& c) {
        if (needs_posteriors(method) && !c.is_soft())
            throw Error(to_string(method) + " needs a classifier with posteriors");
    };

    if (!has_estimated_parameters(method)) {
        auto c = std::make_shared<const Classifier>(train_classifier(X, y, config));
        require_soft(*c);
        model.classifier_ = std::move(c);
        return model;
    }

    const auto split = stratified_split(y, options.inner_train_fraction, options.seed);
    const auto gather = [&](const SampleIndex& part) {
        Labels out;
        out.reserve(part.indices.size());
        for (auto i : part.indices) out.push_back(y[i]);
        return out;
    };
    const auto train_y = gather(split.train);
    const auto val_y = gather(split.holdout);
    const auto val_X = X.select_rows(split.holdout.indices);

    auto c = std::make_shared<const Classifier>(
        train_classifier(X.select_rows(split.train.indices), train_y, config));
    require_soft(*c);

    switch (method) {
    case MethodKind::ACC: model.rates_ = estimate_rates_hard(c->predictions(val_X), val_y); break;
    case MethodKind::PACC: model.rates_ = estimate_rates_soft(c->posteriors(val_X), val_y); break;
    case MethodKind::HDy: {
        const auto post = c->posteriors(val_X);
        for (std::size_t i = 0; i < post.size(); ++i)
            (is_positive(val_y[i]) ? model.hdy_pos_ : model.hdy_neg_).push_back(post[i]);
        if (model.hdy_pos_.empty() || model.hdy_neg_.empty()) throw Error("empty pool");
        break;
    }
    default: break;
    }
    if (model.rates_ && std::abs(model.rates_->tpr - model.rates_->fpr) < kMinRateGap)
        throw Error("unadjustable: degenerate rates");
    model.classifier_ = std::move(c);
    return model;
}

std::size_t QuantifierModel::classifier_train_documents() const {
    return classifier_ ? classifier_->info().train_documents : 0;
}

ClassifierOutputs QuantifierModel::outputs(const SparseMatrix& X) const {
    ClassifierOutputs out;
    if (!classifier_) return out;
    if (needs_posteriors(method_))
        out.posteriors = classifier_->posteriors(X);
    else
        out.predictions = classifier_->predictions(X);
    return out;
}

PrevalenceVector QuantifierModel::quantify_outputs(std::span<const std::uint8_t> predictions,
                                                   std::span<const double> posteriors) const {
    switch (method_) {
    case MethodKind::CC: return cc_quantify(predictions);
    case MethodKind::ACC: return acc_quantify(cc_quantify(predictions), *rates_);
    case MethodKind::PCC: return pcc_quantify(posteriors);
    case MethodKind::PACC: return pacc_quantify(pcc_quantify(posteriors), *rates_);
    case MethodKind::EMQ: return emq_quantify(posteriors, train_prevalence_, emq_);
    case MethodKind::HDy: return hdy_quantify(hdy_pos_, hdy_neg_, posteriors, hdy_);
    case MethodKind::MLPE: return mlpe_quantify(train_prevalence_);
    }
    throw Error("unknown method");
}

PrevalenceVector QuantifierModel::quantify(const ClassifierOutputs& pool,
                                           std::span<const std::size_t> sample) const {
    if (sample.empty()) throw Error("empty sample");
    if (method_ == MethodKind::MLPE) return mlpe_quantify(train_prevalence_);
    std::vector<std::uint8_t> predictions;
    std::vector<double> posteriors;
    if (needs_posteriors(method_)) {
        posteriors.reserve(sample.size());
        for (auto i : sample) posteriors.push_back(pool.posteriors.at(i));
    } else {
        predictions.reserve(sample.size());
        for (auto i : sample) predictions.push_back(pool.predictions.at(i));
    }
    return quantify_outputs(predictions, posteriors);
}

PrevalenceVector QuantifierModel::quantify(const SparseMatrix& X) const {
    if (X.rows() == 0) throw Error("empty sample");
    if (method_ == MethodKind::MLPE) return mlpe_quantify(train_prevalence_);
    const auto out = outputs(X);
    return quantify_outputs(out.predictions, out.posteriors);
}

} // namespace quantkit
