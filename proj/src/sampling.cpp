#include "quantkit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "quantkit/error.hpp"

namespace quantkit {

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) throw Error("empty range");
    // Rejection on the top of the range keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = splitmix64(base);
    for (auto p : parts) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

std::uint64_t stable_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::int64_t round_count(double x) { return static_cast<std::int64_t>(std::round(x)); }

std::int64_t SampleSpec::positive_count() const {
    return round_count(target_prevalence * static_cast<double>(size));
}

std::vector<double> ProtocolPlan::default_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
    return grid;
}

ProtocolPlan ProtocolPlan::with_default_grid(std::int64_t m, std::int64_t q, std::uint64_t seed) {
    return {default_grid(), m, q, seed};
}

void ProtocolPlan::validate() const {
    if (grid.empty()) throw Error("empty prevalence grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) throw Error("grid prevalence outside [0,1]");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw Error("grid not strictly increasing");
    }
    if (samples_per_point < 1) throw Error("samples per point must be positive");
    if (sample_size < 1) throw Error("sample size must be positive");
}

namespace {

void draw_class(const std::vector<std::size_t>& members, std::int64_t count, Rng& rng,
                std::vector<std::size_t>& out) {
    if (count == 0) return;
    if (members.empty()) throw Error("class unavailable");
    const auto need = static_cast<std::size_t>(count);
    if (members.size() >= need) {
        // Partial Fisher-Yates over a private copy.
        std::vector<std::size_t> pool = members;
        for (std::size_t i = 0; i < need; ++i) {
            const auto j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
    } else {
        for (std::size_t i = 0; i < need; ++i) out.push_back(members[rng.below(members.size())]);
    }
}

void partition(std::span<const Label> labels, std::vector<std::size_t>& pos,
               std::vector<std::size_t>& neg) {
    for (std::size_t i = 0; i < labels.size(); ++i)
        (is_positive(labels[i]) ? pos : neg).push_back(i);
}

SampleIndex draw(const std::vector<std::size_t>& pos, const std::vector<std::size_t>& neg,
                 const SampleSpec& spec) {
    const auto n_pos = spec.positive_count();
    Rng rng(spec.seed);
    SampleIndex sample;
    sample.indices.reserve(static_cast<std::size_t>(spec.size));
    draw_class(pos, n_pos, rng, sample.indices);
    draw_class(neg, spec.size - n_pos, rng, sample.indices);
    return sample;
}

void check_spec(const SampleSpec& spec) {
    if (spec.size < 1) throw Error("sample size must be positive");
    if (!(spec.target_prevalence >= 0.0 && spec.target_prevalence <= 1.0))
        throw Error("target prevalence outside [0,1]");
}

} // namespace

SampleIndex generate_indices(std::span<const Label> pool_labels, const SampleSpec& spec) {
    if (pool_labels.empty()) throw Error("empty pool");
    check_spec(spec);
    std::vector<std::size_t> pos, neg;
    partition(pool_labels, pos, neg);
    return draw(pos, neg, spec);
}

std::vector<PrevalencePoint> protocol_samples(std::span<const Label> pool_labels,
                                              const ProtocolPlan& plan) {
    plan.validate();
    if (pool_labels.empty()) throw Error("empty pool");
    std::vector<std::size_t> pos, neg;
    partition(pool_labels, pos, neg);

    std::vector<PrevalencePoint> out;
    out.reserve(plan.grid.size());
    for (std::size_t g = 0; g < plan.grid.size(); ++g) {
        PrevalencePoint point{plan.grid[g], {}};
        point.samples.reserve(static_cast<std::size_t>(plan.samples_per_point));
        for (std::int64_t s = 0; s < plan.samples_per_point; ++s) {
            const SampleSpec spec{plan.grid[g], plan.sample_size,
                                  derive_seed(plan.master_seed, {g, static_cast<std::uint64_t>(s)})};
            check_spec(spec);
            point.samples.push_back(draw(pos, neg, spec));
        }
        out.push_back(std::move(point));
    }
    return out;
}

Split stratified_split(std::span<const Label> labels, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error("train fraction must lie in (0,1)");
    std::vector<std::size_t> pos, neg;
    partition(labels, pos, neg);
    if (pos.empty() || neg.empty()) throw Error("degenerate stratification");

    Rng rng(seed);
    Split split;
    for (auto* members : {&pos, &neg}) {
        auto shuffled = *members;
        for (std::size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
        const auto n_train = static_cast<std::size_t>(
            round_count(train_fraction * static_cast<double>(shuffled.size())));
        split.train.indices.insert(split.train.indices.end(), shuffled.begin(),
                                   shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.holdout.indices.insert(split.holdout.indices.end(),
                                     shuffled.begin() + static_cast<std::ptrdiff_t>(n_train),
                                     shuffled.end());
    }
    std::sort(split.train.indices.begin(), split.train.indices.end());
    std::sort(split.holdout.indices.begin(), split.holdout.indices.end());
    return split;
}

} // namespace quantkit
