#include "quantkit/learners.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include "ascii.hpp"
#include "quantkit/error.hpp"

namespace quantkit {

std::string to_string(LearnerKind kind) {
    switch (kind) {
    case LearnerKind::LR: return "LR";
    case LearnerKind::MNB: return "MNB";
    case LearnerKind::LSVM: return "LSVM";
    }
    return "?";
}

LearnerKind parse_learner(std::string_view name) {
    const auto upper = to_upper(name);
    if (upper == "LR") return LearnerKind::LR;
    if (upper == "MNB") return LearnerKind::MNB;
    if (upper == "LSVM" || upper == "SVM") return LearnerKind::LSVM;
    throw Error("unknown learner kind '" + std::string(name) + "'");
}

LearnerConfig LearnerConfig::logistic(double c, bool balanced) {
    return {LearnerKind::LR, c, balanced, std::nullopt};
}

LearnerConfig LearnerConfig::linear_svm(double c, bool balanced) {
    return {LearnerKind::LSVM, c, balanced, std::nullopt};
}

LearnerConfig LearnerConfig::naive_bayes(double alpha) {
    return {LearnerKind::MNB, std::nullopt, std::nullopt, alpha};
}

void LearnerConfig::validate() const {
    if (kind == LearnerKind::MNB) {
        if (!alpha || c || balanced) throw Error("MNB config takes alpha only");
        if (!(*alpha >= 0.0) || !std::isfinite(*alpha)) throw Error("alpha must be >= 0");
    } else {
        if (!c || !balanced || alpha) throw Error(to_string(kind) + " config takes C and balanced");
        if (!(*c > 0.0) || !std::isfinite(*c)) throw Error("C must be positive");
    }
}

std::string LearnerConfig::describe() const {
    std::ostringstream os;
    os << to_string(kind);
    if (c) os << " C=" << *c;
    if (balanced) os << " balanced=" << (*balanced ? "true" : "false");
    if (alpha) os << " alpha=" << *alpha;
    return os.str();
}

ClassWeights class_weights(const PrevalenceVector& p, bool balanced) {
    if (!balanced) return {1.0, 1.0};
    if (p.pos() <= 0.0 || p.neg() <= 0.0) throw Error("degenerate class weights");
    return {p.neg() / p.pos(), 1.0};
}

double CalibrationMap::operator()(double score) const {
    const double z = a * score + b;
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

bool Classifier::is_soft() const { return kind_ != Kind::LinearSvm || calibration_.has_value(); }

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m) {
    return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double signed_label(Label l) { return is_positive(l) ? 1.0 : -1.0; }

void check_training_input(const SparseMatrix& X, std::span<const Label> y) {
    if (y.empty()) throw Error("empty training set");
    if (X.rows() != y.size()) throw Error("feature rows and labels differ in length");
}

} // namespace

double Classifier::decision(SparseRowView x) const {
    if (kind_ != Kind::NaiveBayes) return x.dot(weights_) + bias_;
    double lp = log_prior_pos_, ln = log_prior_neg_;
    for (std::size_t k = 0; k < x.ids.size(); ++k) {
        if (x.values[k] == 0.0) continue;
        lp += x.values[k] * log_theta_pos_[x.ids[k]];
        ln += x.values[k] * log_theta_neg_[x.ids[k]];
    }
    lp = std::max(lp, kLogJointFloor);
    ln = std::max(ln, kLogJointFloor);
    return lp - ln;
}

double Classifier::posterior(SparseRowView x) const {
    switch (kind_) {
    case Kind::Logistic:
    case Kind::NaiveBayes: return sigmoid(decision(x));
    case Kind::LinearSvm:
        if (!calibration_) throw Error("linear SVM has no posteriors without calibration");
        return (*calibration_)(decision(x));
    }
    return 0.0;
}

std::vector<double> Classifier::decisions(const SparseMatrix& X) const {
    std::vector<double> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) out[i] = decision(X.row(i));
    return out;
}

std::vector<double> Classifier::posteriors(const SparseMatrix& X) const {
    std::vector<double> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) out[i] = posterior(X.row(i));
    return out;
}

std::vector<std::uint8_t> Classifier::predictions(const SparseMatrix& X) const {
    std::vector<std::uint8_t> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict(X.row(i)) ? 1 : 0;
    return out;
}

Classifier Classifier::with_calibration(CalibrationMap map) const {
    Classifier copy = *this;
    copy.calibration_ = map;
    return copy;
}

MinimizeResult minimize_lbfgs(const Objective& f, std::vector<double> x0,
                              std::int64_t max_iterations, double gradient_tolerance) {
    constexpr std::size_t kMemory = 10;
    constexpr double kArmijo = 1e-4;
    const std::size_t n = x0.size();

    MinimizeResult r;
    r.x = std::move(x0);
    std::vector<double> g(n), g_new(n), x_new(n), d(n);
    r.value = f(r.x, g);

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> alpha(kMemory);

    while (true) {
        r.gradient_norm = norm(g);
        if (r.gradient_norm <= gradient_tolerance) {
            r.converged = true;
            return r;
        }
        if (r.iterations >= max_iterations) return r;

        // Two-loop recursion: d = -H g.
        for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
        const std::size_t m = s_hist.size();
        for (std::size_t k = m; k-- > 0;) {
            alpha[k] = rho_hist[k] * dot(s_hist[k], d);
            for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * y_hist[k][i];
        }
        if (m > 0) {
            const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
            for (auto& v : d) v *= gamma;
        }
        for (std::size_t k = 0; k < m; ++k) {
            const double beta = rho_hist[k] * dot(y_hist[k], d);
            for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[k] - beta) * s_hist[k][i];
        }

        double slope = dot(g, d);
        if (!(slope < 0.0)) {
            s_hist.clear(), y_hist.clear(), rho_hist.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            slope = -r.gradient_norm * r.gradient_norm;
        }

        double step = s_hist.empty() ? std::min(1.0, 1.0 / r.gradient_norm) : 1.0;
        double value_new = 0.0;
        bool accepted = false;
        for (int tries = 0; tries < 60; ++tries) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = r.x[i] + step * d[i];
            value_new = f(x_new, g_new);
            // Strict decrease: near the precision floor the Armijo margin rounds away.
            if (std::isfinite(value_new) && value_new < r.value &&
                value_new <= r.value + kArmijo * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (s_hist.empty()) return r; // no descent possible at working precision
            s_hist.clear(), y_hist.clear(), rho_hist.clear();
            continue;
        }

        std::vector<double> s(n), yv(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - r.x[i];
            yv[i] = g_new[i] - g[i];
        }
        const double sy = dot(s, yv);
        if (sy > 1e-10 * norm(s) * norm(yv)) {
            if (s_hist.size() == kMemory) {
                s_hist.pop_front(), y_hist.pop_front(), rho_hist.pop_front();
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
        }
        r.x.swap(x_new);
        g.swap(g_new);
        r.value = value_new;
        ++r.iterations;
    }
}

namespace {

enum class Loss { Logistic, SquaredHinge };

Classifier::Kind kind_for(Loss loss) {
    return loss == Loss::Logistic ? Classifier::Kind::Logistic : Classifier::Kind::LinearSvm;
}

struct LinearFit {
    std::vector<double> weights;
    double bias;
    TrainingInfo info;
};

LinearFit fit_linear(const SparseMatrix& X, std::span<const Label> y, const LearnerConfig& config,
                     Loss loss) {
    check_training_input(X, y);
    config.validate();
    const auto J = class_weights(prevalence_from_labels(y), *config.balanced);
    const double C = *config.c;
    const std::size_t d = X.cols();

    std::vector<double> instance_weight(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        instance_weight[i] = C * (is_positive(y[i]) ? J.pos : J.neg);

    Objective objective = [&](std::span<const double> theta, std::span<double> grad) {
        const auto w = theta.first(d);
        const double b = theta[d];
        double value = 0.5 * dot(w, w);
        for (std::size_t j = 0; j < d; ++j) grad[j] = w[j];
        double grad_b = 0.0;
        for (std::size_t i = 0; i < X.rows(); ++i) {
            const auto row = X.row(i);
            const double t = signed_label(y[i]);
            const double margin = t * (row.dot(w) + b);
            double dz; // derivative of the instance loss w.r.t. the raw score
            if (loss == Loss::Logistic) {
                value += instance_weight[i] * log1p_exp_neg(margin);
                dz = -t * instance_weight[i] * sigmoid(-margin);
            } else {
                const double slack = std::max(0.0, 1.0 - margin);
                value += instance_weight[i] * slack * slack;
                dz = -2.0 * t * instance_weight[i] * slack;
            }
            if (dz == 0.0) continue;
            for (std::size_t k = 0; k < row.ids.size(); ++k) grad[row.ids[k]] += dz * row.values[k];
            grad_b += dz;
        }
        grad[d] = grad_b;
        return value;
    };

    auto result = minimize_lbfgs(objective, std::vector<double>(d + 1, 0.0));
    LinearFit fit;
    fit.bias = result.x[d];
    result.x.resize(d);
    fit.weights = std::move(result.x);
    fit.info = {result.iterations, result.converged, result.gradient_norm, result.value, y.size()};
    return fit;
}

} // namespace

Classifier train_logistic(const SparseMatrix& X, std::span<const Label> y,
                          const LearnerConfig& config) {
    if (config.kind != LearnerKind::LR) throw Error("train_logistic needs an LR config");
    auto fit = fit_linear(X, y, config, Loss::Logistic);
    Classifier c;
    c.kind_ = kind_for(Loss::Logistic);
    c.weights_ = std::move(fit.weights);
    c.bias_ = fit.bias;
    c.info_ = fit.info;
    return c;
}

Classifier train_linear_svm(const SparseMatrix& X, std::span<const Label> y,
                            const LearnerConfig& config) {
    if (config.kind != LearnerKind::LSVM) throw Error("train_linear_svm needs an LSVM config");
    auto fit = fit_linear(X, y, config, Loss::SquaredHinge);
    Classifier c;
    c.kind_ = kind_for(Loss::SquaredHinge);
    c.weights_ = std::move(fit.weights);
    c.bias_ = fit.bias;
    c.info_ = fit.info;
    return c;
}

Classifier train_mnb(const SparseMatrix& X, std::span<const Label> y, const LearnerConfig& config) {
    if (config.kind != LearnerKind::MNB) throw Error("train_mnb needs an MNB config");
    config.validate();
    check_training_input(X, y);
    const double alpha = *config.alpha;
    const std::size_t d = X.cols();

    std::vector<double> count_pos(d, 0.0), count_neg(d, 0.0);
    double n_pos = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        auto& counts = is_positive(y[i]) ? count_pos : count_neg;
        n_pos += is_positive(y[i]) ? 1.0 : 0.0;
        const auto row = X.row(i);
        for (std::size_t k = 0; k < row.ids.size(); ++k) {
            if (row.values[k] < 0.0) throw Error("naive Bayes needs non-negative features");
            counts[row.ids[k]] += row.values[k];
        }
    }
    auto log_likelihoods = [&](const std::vector<double>& counts) {
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0) +
                             alpha * static_cast<double>(d);
        std::vector<double> out(d);
        for (std::size_t j = 0; j < d; ++j) out[j] = std::log(counts[j] + alpha) - std::log(total);
        return out;
    };

    Classifier c;
    c.kind_ = Classifier::Kind::NaiveBayes;
    c.log_theta_pos_ = log_likelihoods(count_pos);
    c.log_theta_neg_ = log_likelihoods(count_neg);
    const double n = static_cast<double>(y.size());
    c.log_prior_pos_ = std::log(n_pos / n);
    c.log_prior_neg_ = std::log((n - n_pos) / n);
    c.info_ = {0, true, 0.0, 0.0, y.size()};
    return c;
}

Classifier train_classifier(const SparseMatrix& X, std::span<const Label> y,
                            const LearnerConfig& config) {
    switch (config.kind) {
    case LearnerKind::LR: return train_logistic(X, y, config);
    case LearnerKind::MNB: return train_mnb(X, y, config);
    case LearnerKind::LSVM: {
        auto svm = train_linear_svm(X, y, config);
        const auto p = prevalence_from_labels(y);
        if (p.pos() == 0.0 || p.neg() == 0.0) return svm;
        return svm.with_calibration(platt_calibrate(svm.decisions(X), y));
    }
    }
    throw Error("unknown learner kind");
}

namespace {

struct PlattTargets {
    double hi, lo;
};

PlattTargets platt_targets(std::span<const Label> labels) {
    const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), Label::Positive));
    const double n_neg = static_cast<double>(labels.size()) - n_pos;
    if (n_pos == 0.0 || n_neg == 0.0) throw Error("calibration needs both classes");
    return {(n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0)};
}

} // namespace

double platt_objective(std::span<const double> scores, std::span<const Label> labels,
                       const CalibrationMap& map) {
    if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
    const auto targets = platt_targets(labels);
    double nll = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double t = is_positive(labels[i]) ? targets.hi : targets.lo;
        const double z = map.a * scores[i] + map.b;
        nll += z >= 0.0 ? t * z + std::log1p(std::exp(-z)) : (t - 1.0) * z + std::log1p(std::exp(z));
    }
    return nll;
}

CalibrationMap platt_calibrate(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
    const auto targets = platt_targets(labels);
    const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), Label::Positive));
    const double n_neg = static_cast<double>(labels.size()) - n_pos;

    constexpr double kRidge = 1e-12;
    constexpr double kTolerance = 1e-8;
    constexpr double kMinStep = 1e-10;

    CalibrationMap map{0.0, std::log((n_neg + 1.0) / (n_pos + 1.0))};
    double value = platt_objective(scores, labels, map);
    for (std::int64_t it = 0; it < kMaxIterations; ++it) {
        double h11 = kRidge, h22 = kRidge, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const double t = is_positive(labels[i]) ? targets.hi : targets.lo;
            const double p = map(scores[i]);
            const double q = 1.0 - p;
            const double pq = p * q;
            h11 += scores[i] * scores[i] * pq;
            h22 += pq;
            h21 += scores[i] * pq;
            g1 += scores[i] * (t - p);
            g2 += t - p;
        }
        if (std::hypot(g1, g2) <= kTolerance) break;

        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;

        double step = 1.0;
        bool moved = false;
        while (step >= kMinStep) {
            const CalibrationMap trial{map.a + step * da, map.b + step * db};
            const double v = platt_objective(scores, labels, trial);
            if (v < value + 1e-4 * step * gd) {
                map = trial;
                value = v;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return map;
}

namespace {

template <typename T>
ClassRates rates(std::span<const T> outputs, std::span<const Label> labels) {
    if (outputs.size() != labels.size()) throw Error("outputs and labels differ in length");
    double sum_pos = 0.0, sum_neg = 0.0, n_pos = 0.0, n_neg = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto v = static_cast<double>(outputs[i]);
        if (is_positive(labels[i])) {
            sum_pos += v;
            n_pos += 1.0;
        } else {
            sum_neg += v;
            n_neg += 1.0;
        }
    }
    if (n_pos == 0.0 || n_neg == 0.0) throw Error("rates undefined: a class is absent");
    return {std::clamp(sum_pos / n_pos, 0.0, 1.0), std::clamp(sum_neg / n_neg, 0.0, 1.0)};
}

} // namespace

ClassRates estimate_rates_hard(std::span<const std::uint8_t> predictions,
                               std::span<const Label> labels) {
    for (auto p : predictions)
        if (p > 1) throw Error("hard predictions must be 0 or 1");
    return rates(predictions, labels);
}

ClassRates estimate_rates_soft(std::span<const double> posteriors, std::span<const Label> labels) {
    for (auto p : posteriors)
        if (!(p >= 0.0 && p <= 1.0)) throw Error("posterior outside [0,1]");
    return rates(posteriors, labels);
}

} // namespace quantkit
