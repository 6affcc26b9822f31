#include "quantkit/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "quantkit/error.hpp"

namespace quantkit {

void Corpus::validate() const {
    if (documents.empty()) throw Error("empty corpus");
    if (documents.size() != labels.size()) throw Error("documents and labels differ in length");
}

Corpus Corpus::subset(std::span<const std::size_t> rows) const {
    Corpus out{name, {}, {}};
    out.documents.reserve(rows.size());
    out.labels.reserve(rows.size());
    for (auto r : rows) {
        out.documents.push_back(documents.at(r));
        out.labels.push_back(labels.at(r));
    }
    return out;
}

void SparseMatrix::push_row(std::span<const std::uint32_t> ids, std::span<const double> values) {
    if (ids.size() != values.size()) throw Error("sparse row: ids and values differ in length");
    for (std::size_t k = 0; k < ids.size(); ++k) {
        if (ids[k] >= n_cols_) throw Error("sparse row: feature id out of range");
        if (k > 0 && ids[k] <= ids[k - 1]) throw Error("sparse row: ids not strictly increasing");
    }
    ids_.insert(ids_.end(), ids.begin(), ids.end());
    values_.insert(values_.end(), values.begin(), values.end());
    offsets_.push_back(ids_.size());
}

SparseMatrix SparseMatrix::select_rows(std::span<const std::size_t> rows) const {
    SparseMatrix out(n_cols_);
    for (auto r : rows) {
        const auto v = row(r);
        out.push_row(v.ids, v.values);
    }
    return out;
}

std::int64_t Vocabulary::id_of(std::string_view term) const {
    const auto it = ids.find(std::string(term));
    return it == ids.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty() && !is_stop_word(current)) tokens.push_back(current);
        current.clear();
    };

    const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
    const auto length = static_cast<std::int32_t>(text.size());
    std::int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(s, i, length, c);
        if (c < 0 || u_isUWhiteSpace(c)) {
            flush();
            continue;
        }
        if (u_ispunct(c)) continue;
        const UChar32 lower = u_tolower(c);
        std::uint8_t buf[U8_MAX_LENGTH];
        std::int32_t n = 0;
        U8_APPEND_UNSAFE(buf, n, lower);
        current.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
    }
    flush();
    return tokens;
}

Vocabulary build_vocabulary(const Corpus& train, std::int64_t min_count) {
    train.validate();
    if (min_count < 1) throw Error("min_count must be positive");

    std::map<std::string, std::pair<std::int64_t, std::int64_t>> stats; // term -> (count, df)
    for (const auto& doc : train.documents) {
        auto tokens = tokenize(doc);
        for (const auto& t : tokens) ++stats[t].first;
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        for (const auto& t : tokens) ++stats[t].second;
    }

    Vocabulary vocab;
    vocab.train_size = static_cast<std::int64_t>(train.size());
    vocab.min_count = min_count;
    for (const auto& [term, st] : stats) {
        if (st.first < min_count) continue;
        vocab.ids.emplace(term, static_cast<std::uint32_t>(vocab.terms.size()));
        vocab.terms.push_back(term);
        vocab.document_frequency.push_back(st.second);
    }
    if (vocab.terms.empty()) throw Error("empty vocabulary");
    return vocab;
}

namespace {

std::map<std::uint32_t, std::int64_t> term_counts(const std::vector<std::string>& tokens,
                                                  const Vocabulary& vocab) {
    std::map<std::uint32_t, std::int64_t> counts;
    for (const auto& t : tokens) {
        const auto it = vocab.ids.find(t);
        if (it != vocab.ids.end()) ++counts[it->second];
    }
    return counts;
}

} // namespace

SparseMatrix vectorize_tokens(const std::vector<std::vector<std::string>>& docs,
                              const Vocabulary& vocab) {
    SparseMatrix out(vocab.size());
    const double n_train = static_cast<double>(vocab.train_size);
    std::vector<std::uint32_t> ids;
    std::vector<double> values;
    for (const auto& tokens : docs) {
        ids.clear();
        values.clear();
        for (const auto& [id, c] : term_counts(tokens, vocab)) {
            const double tf = 1.0 + std::log(static_cast<double>(c));
            const double idf =
                std::log(n_train / static_cast<double>(vocab.document_frequency[id]));
            const double w = tf * idf;
            if (w == 0.0) continue;
            ids.push_back(id);
            values.push_back(w);
        }
        double norm = 0.0;
        for (double v : values) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& v : values) v /= norm;
        out.push_row(ids, values);
    }
    return out;
}

SparseMatrix vectorize(const Corpus& corpus, const Vocabulary& vocab) {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(corpus.size());
    for (const auto& d : corpus.documents) docs.push_back(tokenize(d));
    return vectorize_tokens(docs, vocab);
}

SparseMatrix count_matrix(const Corpus& corpus, const Vocabulary& vocab) {
    SparseMatrix out(vocab.size());
    std::vector<std::uint32_t> ids;
    std::vector<double> values;
    for (const auto& doc : corpus.documents) {
        ids.clear();
        values.clear();
        for (const auto& [id, c] : term_counts(tokenize(doc), vocab)) {
            ids.push_back(id);
            values.push_back(static_cast<double>(c));
        }
        out.push_row(ids, values);
    }
    return out;
}

} // namespace quantkit
