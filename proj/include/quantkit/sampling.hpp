#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "quantkit/prevalence.hpp"

namespace quantkit {

/// Name of the random generator used for every draw in the library. Written
/// into run manifests so results can be tied to the generator.
inline constexpr std::string_view kGeneratorName = "mt19937_64/splitmix64";

/// Portable random source. The engine is fully specified by the C++
/// standard; bounded and real draws are implemented here rather than through
/// the implementation-defined std distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform integer in [0, bound); bound > 0.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform real in [0, 1) with 53 random bits.
    double uniform();
    /// Standard normal via Box-Muller.
    double normal();

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stable mix of a base seed with any number of integer coordinates.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

/// 64-bit FNV-1a, for turning names into seed coordinates.
std::uint64_t stable_hash(std::string_view text);

struct SampleSpec {
    double target_prevalence;
    std::int64_t size;
    std::uint64_t seed;

    /// Number of positives: round-half-away-from-zero of prevalence * size.
    std::int64_t positive_count() const;
};

struct ProtocolPlan {
    std::vector<double> grid;
    std::int64_t samples_per_point;
    std::int64_t sample_size;
    std::uint64_t master_seed;

    /// {0.00, 0.05, ..., 1.00}.
    static std::vector<double> default_grid();
    static ProtocolPlan with_default_grid(std::int64_t m, std::int64_t q, std::uint64_t seed);

    /// Throws quantkit::Error unless the grid is strictly increasing in [0,1]
    /// and m, q are positive.
    void validate() const;
    std::size_t total_samples() const { return grid.size() * static_cast<std::size_t>(samples_per_point); }
};

struct SampleIndex {
    std::vector<std::size_t> indices;
};

struct PrevalencePoint {
    double prevalence;
    std::vector<SampleIndex> samples;
};

/// Draws one sample with exactly round(pi*q) positives. A class is drawn
/// without replacement when the pool holds enough of it, with replacement
/// otherwise. Positives come first in the returned index list.
SampleIndex generate_indices(std::span<const Label> pool_labels, const SampleSpec& spec);

std::vector<PrevalencePoint> protocol_samples(std::span<const Label> pool_labels,
                                              const ProtocolPlan& plan);

struct Split {
    SampleIndex train;
    SampleIndex holdout;
};

/// Per class, round(train_fraction * class size) documents go to train and the
/// rest to holdout. Both index lists are sorted.
Split stratified_split(std::span<const Label> labels, double train_fraction, std::uint64_t seed);

/// Half-away-from-zero rounding of x to an integer count.
std::int64_t round_count(double x);

} // namespace quantkit
