#pragma once

// Frequency-based negative sampling over items, item tokens, or user
// tokens: p(i) proportional to max(0, 1 - sqrt(floor / f(i))) with
// f(i) = count_i / total. Draws use a Vose alias table, O(1) per draw.
//
// Tables are immutable after build; concurrent draws are safe as long as
// each thread uses its own Rng.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cemb/common.hpp"

namespace cemb {

inline constexpr double kDefaultNegSampleFloor = 1e-5;

class SamplingTable {
public:
    SamplingTable() = default;

    // counts[i] / total gives f(i); entries with f(i) <= floor get weight 0
    // (the formula goes negative below the floor; clamping preserves its
    // limit behavior) and are never drawn.
    static SamplingTable build(std::span<const Count> counts, Count total,
                               double floor = kDefaultNegSampleFloor) {
        if (total == 0) throw std::invalid_argument("sampling table: total count is zero");
        SamplingTable t;
        const std::size_t n = counts.size();
        t.weights_.resize(n);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double w = 0.0;
            if (counts[i] > 0) {
                double f = static_cast<double>(counts[i]) / static_cast<double>(total);
                w = 1.0 - std::sqrt(floor / f);
                if (w < 0.0) w = 0.0;
            }
            t.weights_[i] = w;
            sum += w;
        }
        if (sum <= 0.0)
            throw std::runtime_error(
                "sampling table: all weights are zero (every frequency is at or below "
                "the floor " + std::to_string(floor) +
                "); lower neg_sample_floor or supply more data");
        for (double& w : t.weights_) w /= sum;
        t.build_alias();
        return t;
    }

    std::size_t size() const { return weights_.size(); }

    // Normalized probability of index i.
    double probability(std::size_t i) const { return weights_[i]; }

    Index draw(Rng& rng) const {
        const std::size_t n = weights_.size();
        std::size_t slot = static_cast<std::size_t>(rng.below(n));
        return rng.real() < accept_[slot] ? static_cast<Index>(slot) : alias_[slot];
    }

    // Draws `count` indices i.i.d., rejecting anything in `exclude`
    // (resample on hit, at most kMaxRetries attempts per slot).
    void draw(Rng& rng, std::size_t count, std::span<const Index> exclude,
              std::vector<Index>& out) const {
        for (std::size_t q = 0; q < count; ++q) {
            Index v = kInvalidIndex;
            for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
                Index cand = draw(rng);
                bool hit = false;
                for (Index e : exclude)
                    if (e == cand) { hit = true; break; }
                if (!hit) { v = cand; break; }
            }
            if (v == kInvalidIndex)
                throw std::runtime_error(
                    "negative sampling: exclusion set covers the sampled support "
                    "(exhausted " + std::to_string(kMaxRetries) + " retries)");
            out.push_back(v);
        }
    }

    std::vector<Index> draw(Rng& rng, std::size_t count,
                            std::span<const Index> exclude = {}) const {
        std::vector<Index> out;
        out.reserve(count);
        draw(rng, count, exclude, out);
        return out;
    }

    static constexpr int kMaxRetries = 100;

private:
    void build_alias() {
        const std::size_t n = weights_.size();
        accept_.assign(n, 0.0);
        alias_.assign(n, 0);
        std::vector<std::size_t> small, large;
        std::vector<double> scaled(n);
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = weights_[i] * static_cast<double>(n);
            (scaled[i] < 1.0 ? small : large).push_back(i);
        }
        while (!small.empty() && !large.empty()) {
            std::size_t s = small.back(); small.pop_back();
            std::size_t l = large.back(); large.pop_back();
            accept_[s] = scaled[s];
            alias_[s] = static_cast<Index>(l);
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            (scaled[l] < 1.0 ? small : large).push_back(l);
        }
        // Leftovers hold probability ~1; a true zero weight can only be left
        // over through floating-point drift, so keep it unreachable.
        for (std::size_t i : large) accept_[i] = 1.0;
        for (std::size_t i : small) accept_[i] = weights_[i] == 0.0 ? 0.0 : 1.0;
        if (!small.empty()) {
            // Give dangling zero-weight slots a valid alias target.
            std::size_t fallback = 0;
            while (fallback < n && weights_[fallback] == 0.0) ++fallback;
            for (std::size_t i : small)
                if (weights_[i] == 0.0) alias_[i] = static_cast<Index>(fallback);
        }
    }

    std::vector<double> weights_;  // normalized probabilities
    std::vector<double> accept_;
    std::vector<Index> alias_;
};

}  // namespace cemb
