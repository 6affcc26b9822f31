#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "quantkit/prevalence.hpp"
#include "quantkit/text.hpp"

namespace quantkit {

/// Accepts 1/0 and positive/negative (case-insensitive).
Label parse_label(std::string_view token);

/// Reads a UTF-8 file with one `label<TAB>text` document per nonempty line.
/// Errors carry the 1-based line number.
Corpus load_dataset(const std::filesystem::path& path, std::string_view format = "tsv",
                    std::string name = {});

void write_dataset(const std::filesystem::path& path, const Corpus& corpus);

/// Bag-of-words generator with a known label for every document. Each token
/// is drawn from the document's own class lexicon with probability
/// `signal`, from the other class lexicon with probability `noise`, and from
/// a shared Zipf-like vocabulary otherwise.
struct SyntheticSpec {
    std::size_t size = 2000;
    double prevalence = 0.5;
    std::uint64_t seed = 1;
    double signal = 0.15;
    double noise = 0.04;
    std::size_t class_lexicon = 40;
    std::size_t shared_lexicon = 400;
    std::size_t min_length = 15;
    std::size_t max_length = 45;
};

Corpus synthetic_corpus(const SyntheticSpec& spec, std::string name = "synthetic");

/// Training set L and test set U vectorised with a vocabulary built on L.
struct PreparedDataset {
    std::string name;
    Vocabulary vocab;
    SparseMatrix train_X;
    Labels train_y;
    SparseMatrix test_X;
    Labels test_y;
};

PreparedDataset prepare_dataset(const Corpus& train, const Corpus& test, std::int64_t min_count);

/// Cache layout: vocab.tsv (term, df), train.svm and test.svm in sparse
/// `label id:value ...` lines with shortest round-trip number formatting,
/// meta.txt (name, |L|, min_count).
void save_prepared(const PreparedDataset& data, const std::filesystem::path& dir);
PreparedDataset load_prepared(const std::filesystem::path& dir);

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);
double parse_double(std::string_view text);

} // namespace quantkit
