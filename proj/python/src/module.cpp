#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "quantkit/error.hpp"
#include "quantkit/learners.hpp"
#include "quantkit/prevalence.hpp"
#include "quantkit/quantifiers.hpp"
#include "quantkit/sampling.hpp"
#include "quantkit/selection.hpp"
#include "quantkit/text.hpp"
#include "quantkit/ttest.hpp"

namespace py = pybind11;
using namespace quantkit;

namespace {

Labels to_labels(const std::vector<int>& bits) {
    Labels out;
    out.reserve(bits.size());
    for (int b : bits) {
        if (b != 0 && b != 1) throw Error("labels must be 0 or 1");
        out.push_back(b ? Label::Positive : Label::Negative);
    }
    return out;
}

Corpus to_corpus(std::vector<std::string> texts, const std::vector<int>& labels) {
    Corpus c;
    c.name = "python";
    c.documents = std::move(texts);
    c.labels = labels.empty() ? Labels(c.documents.size(), Label::Negative) : to_labels(labels);
    return c;
}

LearnerConfig make_config(const std::string& learner, std::optional<double> c, bool balanced,
                          std::optional<double> alpha) {
    switch (parse_learner(learner)) {
    case LearnerKind::LR: return LearnerConfig::logistic(c.value_or(1.0), balanced);
    case LearnerKind::LSVM: return LearnerConfig::linear_svm(c.value_or(1.0), balanced);
    case LearnerKind::MNB: return LearnerConfig::naive_bayes(alpha.value_or(1.0));
    }
    throw Error("unknown learner");
}

// Text in, prevalence out: owns the vocabulary built from the training texts
// and the quantifier fitted on their tf-idf vectors.
class TextQuantifier {
public:
    TextQuantifier(const std::string& method, const std::string& learner, std::optional<double> c,
                   bool balanced, std::optional<double> alpha, std::int64_t min_count, std::uint64_t seed)
        : method_(parse_method(method)), config_(make_config(learner, c, balanced, alpha)),
          min_count_(min_count), seed_(seed) {}

    TextQuantifier& fit(std::vector<std::string> texts, const std::vector<int>& labels) {
        const auto corpus = to_corpus(std::move(texts), labels);
        corpus.validate();
        auto vocab = build_vocabulary(corpus, min_count_);
        FitOptions options;
        options.seed = seed_;
        model_ = QuantifierModel::fit(method_, vectorize(corpus, vocab), corpus.labels, config_, options);
        vocab_ = std::move(vocab);
        return *this;
    }

    PrevalenceVector quantify(std::vector<std::string> texts) const {
        if (!model_) throw Error("not fitted");
        if (texts.empty()) throw Error("empty sample");
        return model_->quantify(vectorize(to_corpus(std::move(texts), {}), *vocab_));
    }

    std::size_t vocabulary_size() const { return vocab_ ? vocab_->size() : 0; }
    std::string method() const { return to_string(method_); }
    std::string learner() const { return config_.describe(); }

private:
    MethodKind method_;
    LearnerConfig config_;
    std::int64_t min_count_;
    std::uint64_t seed_;
    std::optional<Vocabulary> vocab_;
    std::optional<QuantifierModel> model_;
};

} // namespace

PYBIND11_MODULE(_quantkit, m) {
    m.doc() = "Binary quantification: prevalence estimators, error measures and sampling.";
    py::register_exception<Error>(m, "QuantkitError", PyExc_ValueError);

    py::class_<PrevalenceVector>(m, "PrevalenceVector")
        .def(py::init<double, double>(), py::arg("pos"), py::arg("neg"))
        .def_static("from_positive", &PrevalenceVector::from_positive, py::arg("pos"))
        .def_property_readonly("pos", &PrevalenceVector::pos)
        .def_property_readonly("neg", &PrevalenceVector::neg)
        .def(py::self == py::self)
        .def("__repr__", [](const PrevalenceVector& p) {
            return "PrevalenceVector(pos=" + std::to_string(p.pos()) + ", neg=" + std::to_string(p.neg()) + ")";
        });

    py::class_<ClassRates>(m, "ClassRates")
        .def(py::init<double, double>(), py::arg("tpr"), py::arg("fpr"))
        .def_readonly("tpr", &ClassRates::tpr)
        .def_readonly("fpr", &ClassRates::fpr);

    m.def("absolute_error", &absolute_error, py::arg("p_true"), py::arg("p_hat"));
    m.def("relative_absolute_error", &relative_absolute_error, py::arg("p_true"), py::arg("p_hat"),
          py::arg("sample_size"));
    m.def("smooth", &smooth, py::arg("p"), py::arg("eps"));

    m.def("round_count", &round_count, py::arg("x"));
    m.def("default_grid", &ProtocolPlan::default_grid);
    m.def(
        "generate_indices",
        [](const std::vector<int>& labels, double prevalence, std::int64_t size, std::uint64_t seed) {
            return generate_indices(to_labels(labels), {prevalence, size, seed}).indices;
        },
        py::arg("labels"), py::arg("prevalence"), py::arg("size"), py::arg("seed"),
        "Indices of one sample with exactly round(prevalence * size) positives.");
    m.def(
        "protocol_samples",
        [](const std::vector<int>& labels, std::int64_t m_per_point, std::int64_t size, std::uint64_t seed,
           std::optional<std::vector<double>> grid) {
            const ProtocolPlan plan{grid ? *grid : ProtocolPlan::default_grid(), m_per_point, size, seed};
            std::vector<std::pair<double, std::vector<std::size_t>>> out;
            for (auto& point : protocol_samples(to_labels(labels), plan))
                for (auto& s : point.samples) out.emplace_back(point.prevalence, std::move(s.indices));
            return out;
        },
        py::arg("labels"), py::arg("m"), py::arg("size"), py::arg("seed"), py::arg("grid") = py::none(),
        "List of (grid prevalence, indices) pairs, m samples per grid point.");

    m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"));
    m.def("is_stop_word", [](const std::string& w) { return is_stop_word(w); }, py::arg("token"));

    m.def("cc_quantify", [](const std::vector<std::uint8_t>& p) { return cc_quantify(p); },
          py::arg("predictions"));
    m.def("pcc_quantify", [](const std::vector<double>& p) { return pcc_quantify(p); }, py::arg("posteriors"));
    m.def("acc_quantify", &acc_quantify, py::arg("cc_estimate"), py::arg("rates"));
    m.def("pacc_quantify", &pacc_quantify, py::arg("pcc_estimate"), py::arg("soft_rates"));
    m.def(
        "emq_quantify",
        [](const std::vector<double>& post, const PrevalenceVector& prior, double tolerance, std::int64_t max_iterations) {
            return emq_quantify(post, prior, {tolerance, max_iterations});
        },
        py::arg("posteriors"), py::arg("train_prevalence"), py::arg("tolerance") = EmqSettings{}.tolerance,
        py::arg("max_iterations") = EmqSettings{}.max_iterations);
    m.def(
        "hdy_quantify",
        [](const std::vector<double>& pos, const std::vector<double>& neg, const std::vector<double>& test) {
            return hdy_quantify(pos, neg, test);
        },
        py::arg("val_pos_posteriors"), py::arg("val_neg_posteriors"), py::arg("test_posteriors"));
    m.def("mlpe_quantify", &mlpe_quantify, py::arg("train_prevalence"));
    m.def("hellinger_distance",
          [](const std::vector<double>& p, const std::vector<double>& q) { return hellinger_distance(p, q); },
          py::arg("p"), py::arg("q"));

    py::class_<TTestVerdict>(m, "TTestVerdict")
        .def_readonly("t", &TTestVerdict::t)
        .def_readonly("df", &TTestVerdict::df)
        .def_readonly("p_value", &TTestVerdict::p_value)
        .def_readonly("symbol", &TTestVerdict::symbol)
        .def_readonly("degenerate", &TTestVerdict::degenerate);
    m.def("paired_ttest",
          [](const std::vector<double>& a, const std::vector<double>& b) { return paired_ttest(a, b); },
          py::arg("errors_a"), py::arg("errors_b"));
    m.def("student_t_two_sided", &student_t_two_sided, py::arg("t"), py::arg("df"));

    m.def(
        "grid_for",
        [](const std::string& learner) {
            std::vector<std::string> out;
            for (const auto& c : grid_for(learner).configs) out.push_back(c.describe());
            return out;
        },
        py::arg("learner"), "Descriptions of the hyperparameter configurations searched for a learner.");

    py::class_<TextQuantifier>(m, "TextQuantifier")
        .def(py::init<const std::string&, const std::string&, std::optional<double>, bool, std::optional<double>,
                      std::int64_t, std::uint64_t>(),
             py::arg("method") = "CC", py::arg("learner") = "LR", py::arg("c") = py::none(),
             py::arg("balanced") = false, py::arg("alpha") = py::none(), py::arg("min_count") = 5,
             py::arg("seed") = 0)
        .def("fit", &TextQuantifier::fit, py::arg("texts"), py::arg("labels"), py::return_value_policy::reference)
        .def("quantify", &TextQuantifier::quantify, py::arg("texts"))
        .def_property_readonly("vocabulary_size", &TextQuantifier::vocabulary_size)
        .def_property_readonly("method", &TextQuantifier::method)
        .def_property_readonly("learner", &TextQuantifier::learner);
}
