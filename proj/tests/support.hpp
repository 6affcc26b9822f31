#pragma once

#include <cstdint>
#include <vector>

#include "quantkit/prevalence.hpp"
#include "quantkit/text.hpp"

namespace qk_test {

using quantkit::Label;
using quantkit::Labels;

inline Labels make_labels(std::size_t n_pos, std::size_t n_neg) {
    Labels y(n_pos, Label::Positive);
    y.insert(y.end(), n_neg, Label::Negative);
    return y;
}

inline Labels from_bits(std::initializer_list<int> bits) {
    Labels y;
    for (int b : bits) y.push_back(b ? Label::Positive : Label::Negative);
    return y;
}

/// Dense rows to CSR, dropping zeros.
inline quantkit::SparseMatrix dense_to_sparse(const std::vector<std::vector<double>>& rows,
                                              std::size_t cols) {
    quantkit::SparseMatrix m(cols);
    for (const auto& r : rows) {
        std::vector<std::uint32_t> ids;
        std::vector<double> vals;
        for (std::size_t j = 0; j < r.size(); ++j)
            if (r[j] != 0.0) {
                ids.push_back(static_cast<std::uint32_t>(j));
                vals.push_back(r[j]);
            }
        m.push_row(ids, vals);
    }
    return m;
}

inline std::size_t count_positive(const Labels& pool, const std::vector<std::size_t>& idx) {
    std::size_t n = 0;
    for (auto i : idx) n += quantkit::is_positive(pool[i]);
    return n;
}

} // namespace qk_test
