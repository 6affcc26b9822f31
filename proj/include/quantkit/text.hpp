#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "quantkit/prevalence.hpp"

namespace quantkit {

struct Corpus {
    std::string name;
    std::vector<std::string> documents;
    Labels labels;

    std::size_t size() const { return documents.size(); }
    /// Throws unless documents and labels are nonempty and of equal length.
    void validate() const;
    /// Sub-corpus holding the given positions, in the given order.
    Corpus subset(std::span<const std::size_t> rows) const;
};

/// Read-only view of one sparse row; ids strictly increasing.
struct SparseRowView {
    std::span<const std::uint32_t> ids;
    std::span<const double> values;

    double dot(std::span<const double> dense) const {
        double s = 0.0;
        for (std::size_t k = 0; k < ids.size(); ++k) s += values[k] * dense[ids[k]];
        return s;
    }
};

/// Compressed sparse rows.
class SparseMatrix {
public:
    explicit SparseMatrix(std::size_t n_cols = 0) : n_cols_(n_cols) {}

    std::size_t rows() const { return offsets_.size() - 1; }
    std::size_t cols() const { return n_cols_; }
    std::size_t nonzeros() const { return ids_.size(); }

    /// Appends a row; ids must be strictly increasing and < cols().
    void push_row(std::span<const std::uint32_t> ids, std::span<const double> values);

    SparseRowView row(std::size_t i) const {
        const auto b = offsets_[i], e = offsets_[i + 1];
        return {std::span(ids_).subspan(b, e - b), std::span(values_).subspan(b, e - b)};
    }

    SparseMatrix select_rows(std::span<const std::size_t> rows) const;

    bool operator==(const SparseMatrix&) const = default;

private:
    std::size_t n_cols_;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::uint32_t> ids_;
    std::vector<double> values_;
};

struct Vocabulary {
    std::vector<std::string> terms;             // id -> term, lexicographic
    std::unordered_map<std::string, std::uint32_t> ids;
    std::vector<std::int64_t> document_frequency;
    std::int64_t train_size = 0;
    std::int64_t min_count = 0;

    std::size_t size() const { return terms.size(); }
    /// Returns -1 for out-of-vocabulary terms.
    std::int64_t id_of(std::string_view term) const;
};

bool is_stop_word(std::string_view token);
std::span<const std::string_view> stop_words();

/// Lowercases (Unicode simple case mapping), deletes characters of the Unicode
/// punctuation categories, splits on whitespace and drops stop words.
std::vector<std::string> tokenize(std::string_view text);

/// Keeps the terms whose total occurrence count over the training corpus is
/// at least min_count.
Vocabulary build_vocabulary(const Corpus& train, std::int64_t min_count = 5);

/// Sublinear tf-idf: (1 + ln c) * ln(|L| / df), rows scaled to unit
/// Euclidean norm. Out-of-vocabulary terms are ignored.
SparseMatrix vectorize(const Corpus& corpus, const Vocabulary& vocab);
SparseMatrix vectorize_tokens(const std::vector<std::vector<std::string>>& docs,
                              const Vocabulary& vocab);

/// Raw in-vocabulary term counts.
SparseMatrix count_matrix(const Corpus& corpus, const Vocabulary& vocab);

} // namespace quantkit
