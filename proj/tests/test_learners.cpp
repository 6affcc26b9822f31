#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "quantkit/error.hpp"
#include "quantkit/learners.hpp"
#include "support.hpp"

using namespace quantkit;
using qk_test::dense_to_sparse;
using qk_test::from_bits;

namespace {

double logistic_objective(const SparseMatrix& X, const Labels& y, double c, ClassWeights j,
                          const std::vector<double>& w, double b) {
    double v = 0.0;
    for (double wi : w) v += 0.5 * wi * wi;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double s = is_positive(y[i]) ? 1.0 : -1.0;
        const double m = s * (X.row(i).dot(w) + b);
        v += c * (is_positive(y[i]) ? j.pos : j.neg) * std::log1p(std::exp(-m));
    }
    return v;
}

double squared_hinge_objective(const SparseMatrix& X, const Labels& y, double c, ClassWeights j,
                               const std::vector<double>& w, double b) {
    double v = 0.0;
    for (double wi : w) v += 0.5 * wi * wi;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double s = is_positive(y[i]) ? 1.0 : -1.0;
        const double h = std::max(0.0, 1.0 - s * (X.row(i).dot(w) + b));
        v += c * (is_positive(y[i]) ? j.pos : j.neg) * h * h;
    }
    return v;
}

struct Toy {
    SparseMatrix X;
    Labels y;
};

// Two noisy clusters in 6 dimensions, first `n_pos` rows positive.
Toy noisy_clusters(std::size_t n_pos, std::size_t n_neg, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<std::vector<double>> rows;
    Labels y;
    for (std::size_t i = 0; i < n_pos + n_neg; ++i) {
        const bool pos = i < n_pos;
        std::vector<double> r(6);
        for (std::size_t k = 0; k < 6; ++k) r[k] = z(gen) + (pos ? 0.6 : -0.6) * (k < 3 ? 1.0 : 0.0);
        rows.push_back(r);
        y.push_back(pos ? Label::Positive : Label::Negative);
    }
    return {dense_to_sparse(rows, 6), y};
}

Labels flipped(const Labels& y) {
    Labels out;
    for (auto l : y) out.push_back(is_positive(l) ? Label::Negative : Label::Positive);
    return out;
}

} // namespace

TEST_CASE("learner configs") {
    CHECK(parse_learner("LR") == LearnerKind::LR);
    CHECK(parse_learner("svm") == LearnerKind::LSVM);
    CHECK(parse_learner("MNB") == LearnerKind::MNB);
    CHECK_THROWS_AS(parse_learner("RF"), Error);
    CHECK_NOTHROW(LearnerConfig::logistic(1.0, true).validate());
    CHECK_THROWS_AS(LearnerConfig::logistic(0.0).validate(), Error);
    CHECK_THROWS_AS(LearnerConfig::naive_bayes(-0.5).validate(), Error);
    LearnerConfig mixed = LearnerConfig::naive_bayes(1.0);
    mixed.c = 1.0;
    CHECK_THROWS_AS(mixed.validate(), Error);
}

TEST_CASE("class_weights") {
    const auto w = class_weights({0.9, 0.1}, true);
    CHECK(w.pos == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    CHECK(w.pos == doctest::Approx(0.1111).epsilon(1e-3));
    CHECK(w.neg == 1.0);
    const auto even = class_weights({0.5, 0.5}, true);
    CHECK(even.pos == 1.0);
    CHECK(even.neg == 1.0);
    const auto plain = class_weights({0.9, 0.1}, false);
    CHECK(plain.pos == 1.0);
    CHECK(plain.neg == 1.0);
    CHECK_THROWS_WITH_AS(class_weights({1.0, 0.0}, true), doctest::Contains("degenerate class weights"),
                         Error);
}

TEST_CASE("logistic regression on small cases") {
    const auto X = dense_to_sparse({{1.0, 0.0}, {0.0, 1.0}}, 2);
    const auto y = from_bits({1, 0});
    const auto m = train_logistic(X, y, LearnerConfig::logistic(10.0));
    CHECK(m.predict(X.row(0)));
    CHECK_FALSE(m.predict(X.row(1)));
    CHECK(m.is_soft());

    const auto all_pos = from_bits({1, 1});
    const auto p = train_logistic(X, all_pos, LearnerConfig::logistic(1.0));
    for (double post : p.posteriors(X)) CHECK(post > 0.5);

    const ClassWeights ones{1.0, 1.0};
    const std::vector<double> w(m.weights().begin(), m.weights().end());
    CHECK(logistic_objective(X, y, 10.0, ones, w, m.bias()) <=
          logistic_objective(X, y, 10.0, ones, {0.0, 0.0}, 0.0));
}

TEST_CASE("linear SVM on small cases") {
    const auto X = dense_to_sparse({{1.0, 0.0}, {0.0, 1.0}, {0.9, 0.1}, {0.2, 0.8}}, 2);
    const auto y = from_bits({1, 0, 1, 0});
    const auto m = train_linear_svm(X, y, LearnerConfig::linear_svm(100.0));
    CHECK_FALSE(m.is_soft());
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(m.predict(X.row(i)) == is_positive(y[i]));
        CHECK((m.decision(X.row(i)) > 0.0) == m.predict(X.row(i)));
    }
    CHECK_THROWS_AS(m.posterior(X.row(0)), Error);
    const std::vector<double> w(m.weights().begin(), m.weights().end());
    CHECK(squared_hinge_objective(X, y, 100.0, {1.0, 1.0}, w, m.bias()) <=
          squared_hinge_objective(X, y, 100.0, {1.0, 1.0}, {0.0, 0.0}, 0.0));
    // Separable with a margin: the squared hinge can be driven to (nearly) zero loss.
    const double reg = 0.5 * (w[0] * w[0] + w[1] * w[1]);
    CHECK(squared_hinge_objective(X, y, 100.0, {1.0, 1.0}, w, m.bias()) - reg < 0.5);

    const auto calibrated = train_classifier(X, y, LearnerConfig::linear_svm(100.0));
    CHECK(calibrated.is_soft());
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(calibrated.predict(X.row(i)) == is_positive(y[i]));
}

TEST_CASE("linear objectives: returned point beats the origin and random points") {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> z(0.0, 1.0);
    for (double c : {0.01, 1.0, 100.0}) {
        for (bool balanced : {false, true}) {
            const auto toy = noisy_clusters(70, 30, static_cast<std::uint64_t>(c * 100) + balanced);
            const auto j = class_weights(prevalence_from_labels(toy.y), balanced);
            const auto lr = train_logistic(toy.X, toy.y, LearnerConfig::logistic(c, balanced));
            const auto sv = train_linear_svm(toy.X, toy.y, LearnerConfig::linear_svm(c, balanced));
            const std::vector<double> wl(lr.weights().begin(), lr.weights().end());
            const std::vector<double> ws(sv.weights().begin(), sv.weights().end());
            const double fl = logistic_objective(toy.X, toy.y, c, j, wl, lr.bias());
            const double fs = squared_hinge_objective(toy.X, toy.y, c, j, ws, sv.bias());
            CHECK(fl == doctest::Approx(lr.info().objective).epsilon(1e-9));
            CHECK(fl <= logistic_objective(toy.X, toy.y, c, j, std::vector<double>(6), 0.0));
            CHECK(fs <= squared_hinge_objective(toy.X, toy.y, c, j, std::vector<double>(6), 0.0));
            for (int r = 0; r < 10; ++r) {
                std::vector<double> w(6);
                for (auto& x : w) x = z(gen);
                const double b = z(gen);
                CHECK(fl <= logistic_objective(toy.X, toy.y, c, j, w, b));
                CHECK(fs <= squared_hinge_objective(toy.X, toy.y, c, j, w, b));
            }
        }
    }
}

TEST_CASE("balanced weighting is a no-op on balanced data") {
    const auto toy = noisy_clusters(40, 40, 5);
    for (auto make : {&LearnerConfig::logistic, &LearnerConfig::linear_svm}) {
        const auto a = train_classifier(toy.X, toy.y, make(3.0, true));
        const auto b = train_classifier(toy.X, toy.y, make(3.0, false));
        CHECK(std::equal(a.weights().begin(), a.weights().end(), b.weights().begin(),
                         b.weights().end()));
        CHECK(a.bias() == b.bias());
        CHECK(a.decisions(toy.X) == b.decisions(toy.X));
    }
}

TEST_CASE("posteriors are probabilities") {
    const auto toy = noisy_clusters(30, 50, 9);
    for (const auto& cfg : {LearnerConfig::logistic(1.0), LearnerConfig::linear_svm(1.0, true)}) {
        const auto m = train_classifier(toy.X, toy.y, cfg);
        for (std::size_t i = 0; i < toy.y.size(); ++i) {
            const double p = m.posterior(toy.X.row(i));
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
}

TEST_CASE("naive Bayes separable and symmetric cases") {
    const auto X = dense_to_sparse({{3.0, 0.0}, {0.0, 3.0}}, 2);
    const auto y = from_bits({1, 0});
    const auto m = train_mnb(X, y, LearnerConfig::naive_bayes(1.0));
    CHECK(m.predict(X.row(0)));
    CHECK_FALSE(m.predict(X.row(1)));

    const auto Xs = dense_to_sparse({{2.0, 1.0}, {1.0, 2.0}}, 2);
    const auto s = train_mnb(Xs, y, LearnerConfig::naive_bayes(1.0));
    const auto probe = dense_to_sparse({{1.0, 1.0}}, 2);
    CHECK(s.posterior(probe.row(0)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("naive Bayes posterior matches Bayes rule by hand") {
    // Positive docs (2,0), (1,1), (0,1); negative doc (1,3); alpha = 1.
    const auto X = dense_to_sparse({{2.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {1.0, 3.0}}, 2);
    const auto y = from_bits({1, 1, 1, 0});
    const auto m = train_mnb(X, y, LearnerConfig::naive_bayes(1.0));
    const double t_pos[2] = {4.0 / 7.0, 3.0 / 7.0};
    const double t_neg[2] = {2.0 / 6.0, 4.0 / 6.0};
    const double joint_pos = 0.75 * t_pos[0] * t_pos[0] * t_pos[1];
    const double joint_neg = 0.25 * t_neg[0] * t_neg[0] * t_neg[1];
    const auto probe = dense_to_sparse({{2.0, 1.0}}, 2);
    CHECK(std::abs(m.posterior(probe.row(0)) - joint_pos / (joint_pos + joint_neg)) <= 1e-12);
}

TEST_CASE("naive Bayes without smoothing stays finite") {
    const auto X = dense_to_sparse({{1.0, 0.0}, {0.0, 1.0}}, 2);
    const auto y = from_bits({1, 0});
    const auto m = train_mnb(X, y, LearnerConfig::naive_bayes(0.0));
    const auto probe = dense_to_sparse({{1.0, 1.0}, {2.0, 0.0}, {0.0, 0.0}}, 2);
    for (std::size_t i = 0; i < 3; ++i) {
        const double p = m.posterior(probe.row(i));
        CHECK(std::isfinite(p));
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
    CHECK(m.posterior(probe.row(1)) > 0.5);
}

TEST_CASE("Platt calibration") {
    std::vector<double> scores;
    Labels y;
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const double s = 6.0 * u(gen) - 3.0;
        scores.push_back(s);
        y.push_back(u(gen) < 1.0 / (1.0 + std::exp(-s)) ? Label::Positive : Label::Negative);
    }
    const auto map = platt_calibrate(scores, y);
    CHECK(map.a < 0.0);
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return scores[i] < scores[j]; });
    for (std::size_t k = 1; k < order.size(); ++k) {
        CHECK(map(scores[order[k]]) >= map(scores[order[k - 1]]));
        CHECK(map(scores[order[k]]) > 0.0);
        CHECK(map(scores[order[k]]) < 1.0);
    }
    const double nll = platt_objective(scores, y, map);
    CHECK(nll <= platt_objective(scores, y, {-1.0, 0.0}));
    CHECK(nll <= platt_objective(scores, y, {0.0, 0.0}));

    std::vector<double> negated;
    for (double s : scores) negated.push_back(-s);
    const auto mirror = platt_calibrate(negated, y);
    CHECK(mirror.a > 0.0);
    CHECK(mirror.a == doctest::Approx(-map.a).epsilon(1e-6));

    const auto one_class = from_bits({1, 1, 1});
    const std::vector<double> three{0.1, 0.2, 0.3};
    CHECK_THROWS_WITH_AS(platt_calibrate(three, one_class),
                         doctest::Contains("calibration needs both classes"), Error);
}

TEST_CASE("hard rate estimates") {
    const auto y = from_bits({1, 1, 0, 0});
    const std::vector<std::uint8_t> mixed{1, 0, 1, 0}, perfect{1, 1, 0, 0}, ones{1, 1, 1, 1};
    const auto a = estimate_rates_hard(mixed, y);
    CHECK(a.tpr == 0.5);
    CHECK(a.fpr == 0.5);
    const auto b = estimate_rates_hard(perfect, y);
    CHECK(b.tpr == 1.0);
    CHECK(b.fpr == 0.0);
    const auto c = estimate_rates_hard(ones, y);
    CHECK(c.tpr == 1.0);
    CHECK(c.fpr == 1.0);
    const auto single = from_bits({1, 1});
    const std::vector<std::uint8_t> two{1, 0};
    CHECK_THROWS_WITH_AS(estimate_rates_hard(two, single), doctest::Contains("rates undefined"),
                         Error);
}

TEST_CASE("soft rate estimates") {
    const auto y = from_bits({1, 1, 0, 0});
    const std::vector<double> post{0.8, 0.6, 0.3, 0.1}, ones{1, 1, 1, 1}, hard{1, 1, 0, 0};
    const auto a = estimate_rates_soft(post, y);
    CHECK(a.tpr == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(a.fpr == doctest::Approx(0.2).epsilon(1e-12));
    const auto b = estimate_rates_soft(ones, y);
    CHECK(b.tpr == 1.0);
    CHECK(b.fpr == 1.0);
    const auto c = estimate_rates_soft(hard, y);
    CHECK(c.tpr == 1.0);
    CHECK(c.fpr == 0.0);
    const auto single = from_bits({0, 0});
    const std::vector<double> two{0.2, 0.4};
    CHECK_THROWS_AS(estimate_rates_soft(two, single), Error);
}

TEST_CASE("rates on training outputs stay in [0,1]") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto toy = noisy_clusters(20 + 10 * seed, 40, seed);
        const auto m = train_logistic(toy.X, toy.y, LearnerConfig::logistic(1.0));
        const auto h = estimate_rates_hard(m.predictions(toy.X), toy.y);
        const auto s = estimate_rates_soft(m.posteriors(toy.X), toy.y);
        for (double r : {h.tpr, h.fpr, s.tpr, s.fpr}) {
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
        }
    }
}

TEST_CASE("L-BFGS minimises a convex quadratic") {
    const Objective f = [](std::span<const double> x, std::span<double> g) {
        const double a = x[0] - 3.0, b = x[1] + 1.0;
        g[0] = 2.0 * a + 0.5 * b;
        g[1] = 10.0 * b + 0.5 * a;
        return a * a + 5.0 * b * b + 0.5 * a * b;
    };
    const auto r = minimize_lbfgs(f, {0.0, 0.0});
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(r.x[1] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(r.gradient_norm <= kGradientTolerance);
}

TEST_CASE("training is deterministic") {
    const auto toy = noisy_clusters(25, 45, 31);
    for (const auto& cfg : {LearnerConfig::logistic(10.0, true), LearnerConfig::linear_svm(0.1),
                            LearnerConfig::naive_bayes(0.5)}) {
        auto X = toy.X;
        if (cfg.kind == LearnerKind::MNB) {
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < toy.y.size(); ++i) {
                std::vector<double> r(6);
                const auto row = toy.X.row(i);
                for (std::size_t k = 0; k < row.ids.size(); ++k) r[row.ids[k]] = std::abs(row.values[k]);
                rows.push_back(r);
            }
            X = dense_to_sparse(rows, 6);
        }
        const auto a = train_classifier(X, toy.y, cfg);
        const auto b = train_classifier(X, toy.y, cfg);
        CHECK(a.decisions(X) == b.decisions(X));
        CHECK(train_classifier(X, flipped(toy.y), cfg).decisions(X) != a.decisions(X));
    }
}
