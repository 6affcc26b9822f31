#include "quantkit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "quantkit/error.hpp"
#include "quantkit/sampling.hpp"

namespace quantkit {

namespace fs = std::filesystem;

Label parse_label(std::string_view token) {
    std::string lower(token);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "1" || lower == "positive") return Label::Positive;
    if (lower == "0" || lower == "negative") return Label::Negative;
    throw Error("unknown label '" + std::string(token) + "'");
}

Corpus load_dataset(const fs::path& path, std::string_view format, std::string name) {
    if (format != "tsv") throw Error("unsupported dataset format '" + std::string(format) + "'");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read dataset " + path.string());
    Corpus corpus{name.empty() ? path.stem().string() : std::move(name), {}, {}};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error(path.string() + ":" + std::to_string(line_no) +
                        ": malformed line (expected label<TAB>text)");
        std::string_view label(line.data(), tab);
        while (!label.empty() && label.front() == ' ') label.remove_prefix(1);
        while (!label.empty() && label.back() == ' ') label.remove_suffix(1);
        try {
            corpus.labels.push_back(parse_label(label));
        } catch (const Error& e) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        corpus.documents.push_back(line.substr(tab + 1));
    }
    if (corpus.documents.empty()) throw Error("empty corpus: " + path.string());
    return corpus;
}

void write_dataset(const fs::path& path, const Corpus& corpus) {
    corpus.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        std::string text = corpus.documents[i];
        std::replace(text.begin(), text.end(), '\t', ' ');
        std::replace(text.begin(), text.end(), '\n', ' ');
        out << (is_positive(corpus.labels[i]) ? '1' : '0') << '\t' << text << '\n';
    }
    if (!out) throw Error("cannot write " + path.string());
}

Corpus synthetic_corpus(const SyntheticSpec& spec, std::string name) {
    if (spec.size == 0) throw Error("synthetic corpus needs at least one document");
    if (!(spec.prevalence >= 0.0 && spec.prevalence <= 1.0))
        throw Error("synthetic prevalence outside [0,1]");
    if (spec.signal < 0.0 || spec.noise < 0.0 || spec.signal + spec.noise > 1.0)
        throw Error("synthetic signal/noise probabilities invalid");
    if (spec.min_length == 0 || spec.max_length < spec.min_length)
        throw Error("synthetic document lengths invalid");

    Rng rng(spec.seed);
    const auto n_pos =
        static_cast<std::size_t>(round_count(spec.prevalence * static_cast<double>(spec.size)));
    Labels labels(spec.size, Label::Negative);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), Label::Positive);
    for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);

    auto zipf_index = [&](std::size_t n) {
        const double u = rng.uniform();
        return std::min(n - 1, static_cast<std::size_t>(static_cast<double>(n) * u * u));
    };

    Corpus corpus{std::move(name), {}, labels};
    corpus.documents.reserve(spec.size);
    for (Label y : labels) {
        const auto length = spec.min_length + rng.below(spec.max_length - spec.min_length + 1);
        const char* own = is_positive(y) ? "pterm" : "nterm";
        const char* other = is_positive(y) ? "nterm" : "pterm";
        std::string doc;
        for (std::size_t k = 0; k < length; ++k) {
            const double u = rng.uniform();
            if (!doc.empty()) doc += ' ';
            if (u < spec.signal)
                doc += own + std::to_string(zipf_index(spec.class_lexicon));
            else if (u < spec.signal + spec.noise)
                doc += other + std::to_string(zipf_index(spec.class_lexicon));
            else
                doc += "wterm" + std::to_string(zipf_index(spec.shared_lexicon));
        }
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

PreparedDataset prepare_dataset(const Corpus& train, const Corpus& test, std::int64_t min_count) {
    train.validate();
    test.validate();
    PreparedDataset out;
    out.name = train.name;
    out.vocab = build_vocabulary(train, min_count);
    out.train_X = vectorize(train, out.vocab);
    out.train_y = train.labels;
    out.test_X = vectorize(test, out.vocab);
    out.test_y = test.labels;
    return out;
}

std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

double parse_double(std::string_view text) {
    double x = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), x);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size())
        throw Error("not a number: '" + std::string(text) + "'");
    return x;
}

namespace {

void write_matrix(const fs::path& path, const SparseMatrix& X, const Labels& y) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << X.cols() << '\n';
    for (std::size_t i = 0; i < X.rows(); ++i) {
        out << (is_positive(y[i]) ? 1 : 0);
        const auto row = X.row(i);
        for (std::size_t k = 0; k < row.ids.size(); ++k)
            out << ' ' << row.ids[k] << ':' << format_double(row.values[k]);
        out << '\n';
    }
    if (!out) throw Error("cannot write " + path.string());
}

std::pair<SparseMatrix, Labels> read_matrix(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::size_t cols = 0;
    std::string line;
    if (!std::getline(in, line)) throw Error("truncated matrix file " + path.string());
    cols = static_cast<std::size_t>(std::stoull(line));
    SparseMatrix X(cols);
    Labels y;
    std::vector<std::uint32_t> ids;
    std::vector<double> values;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string tok;
        fields >> tok;
        y.push_back(parse_label(tok));
        ids.clear();
        values.clear();
        while (fields >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos) throw Error("malformed matrix entry in " + path.string());
            ids.push_back(static_cast<std::uint32_t>(std::stoul(tok.substr(0, colon))));
            values.push_back(parse_double(std::string_view(tok).substr(colon + 1)));
        }
        X.push_row(ids, values);
    }
    return {std::move(X), std::move(y)};
}

} // namespace

void save_prepared(const PreparedDataset& data, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream meta(dir / "meta.txt");
        meta << data.name << '\n' << data.vocab.train_size << '\n' << data.vocab.min_count << '\n';
        std::ofstream vocab(dir / "vocab.tsv", std::ios::binary);
        for (std::size_t i = 0; i < data.vocab.size(); ++i)
            vocab << data.vocab.terms[i] << '\t' << data.vocab.document_frequency[i] << '\n';
        if (!meta || !vocab) throw Error("cannot write prepared dataset to " + dir.string());
    }
    write_matrix(dir / "train.svm", data.train_X, data.train_y);
    write_matrix(dir / "test.svm", data.test_X, data.test_y);
}

PreparedDataset load_prepared(const fs::path& dir) {
    PreparedDataset data;
    std::ifstream meta(dir / "meta.txt");
    if (!meta) throw Error("no prepared dataset in " + dir.string());
    meta >> data.name >> data.vocab.train_size >> data.vocab.min_count;
    std::ifstream vocab(dir / "vocab.tsv", std::ios::binary);
    std::string line;
    while (std::getline(vocab, line)) {
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error("malformed vocabulary in " + dir.string());
        data.vocab.ids.emplace(line.substr(0, tab), static_cast<std::uint32_t>(data.vocab.terms.size()));
        data.vocab.terms.push_back(line.substr(0, tab));
        data.vocab.document_frequency.push_back(std::stoll(line.substr(tab + 1)));
    }
    std::tie(data.train_X, data.train_y) = read_matrix(dir / "train.svm");
    std::tie(data.test_X, data.test_y) = read_matrix(dir / "test.svm");
    return data;
}

} // namespace quantkit
