#pragma once

// Item-in embedding inference for items unseen in training, from their
// context tokens alone. Maximizes the sampled-softmax log-likelihood
//
//   sum over tokens w:  s(w,z) - log sum_{v in {w} + Neg(W)} e^{s(v,z)}
//
// by projected gradient ascent on the ball ||z|| <= norm_cap, starting from
// the mean of the tokens' word rows. The positive token is part of its own
// denominator and the iterate is norm-capped; without both the objective is
// unbounded above.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cemb/common.hpp"
#include "cemb/embedding_store.hpp"
#include "cemb/neg_sampler.hpp"
#include "cemb/vocab.hpp"

namespace cemb {

struct ColdStartRequest {
    std::vector<Index> tokens;  // item-token indices, in vocabulary
    int steps = 200;
    double step_size = 0.05;  // decayed as step_size / sqrt(t)
    double norm_cap = 0.0;    // <= 0 selects the store default
    int negatives = 5;
    // Test mode: negatives drawn once per token (keyed by the token, so a
    // permutation of `tokens` sees the same sets) instead of fresh per step.
    bool fixed_negatives = false;
};

// Default cap: 95th percentile of the trained item-in row norms, tying cold
// items to the trained geometry.
template <typename Real>
double default_norm_cap(const EmbeddingStoreT<Real>& store) {
    std::vector<double> norms(store.item_in.rows);
    for (std::size_t i = 0; i < store.item_in.rows; ++i) {
        const Real* r = store.item_in.row(static_cast<Index>(i));
        norms[i] = std::sqrt(dot(r, r, store.dim));
    }
    std::size_t q = norms.size() * 95 / 100;
    if (q >= norms.size()) q = norms.size() - 1;
    std::nth_element(norms.begin(), norms.begin() + q, norms.end());
    return norms[q];
}

// Objective value of candidate embedding z given per-token candidate sets
// (positive first in each set).
template <typename Real>
double coldstart_objective(std::span<const double> z,
                           const std::vector<std::vector<Index>>& candidate_sets,
                           const EmbeddingStoreT<Real>& store) {
    double obj = 0.0;
    for (const auto& cands : candidate_sets) {
        double max_s = -1e300;
        std::vector<double> scores(cands.size());
        for (std::size_t i = 0; i < cands.size(); ++i) {
            const Real* row = store.word.row(cands[i]);
            double s = 0.0;
            for (Index d = 0; d < store.dim; ++d) s += static_cast<double>(row[d]) * z[d];
            scores[i] = s;
            max_s = std::max(max_s, s);
        }
        double lse = 0.0;
        for (double s : scores) lse += std::exp(s - max_s);
        obj += scores[0] - (max_s + std::log(lse));
    }
    return obj;
}

using ColdStartStepCallback = std::function<void(int step, double objective)>;

template <typename Real>
std::vector<float> infer_cold_item(const ColdStartRequest& req,
                                   const EmbeddingStoreT<Real>& store,
                                   const SamplingTable& token_table, Rng& rng,
                                   const ColdStartStepCallback& on_step = nullptr) {
    if (req.tokens.empty())
        throw std::invalid_argument("cold-start inference: no in-vocabulary tokens");
    const Index dim = store.dim;
    const double cap = req.norm_cap > 0 ? req.norm_cap : default_norm_cap(store);

    std::vector<double> z(dim, 0.0);
    for (Index w : req.tokens) {
        const Real* row = store.word.row(w);
        for (Index d = 0; d < dim; ++d) z[d] += static_cast<double>(row[d]);
    }
    for (Index d = 0; d < dim; ++d) z[d] /= static_cast<double>(req.tokens.size());

    auto project = [&] {
        double norm = 0.0;
        for (double v : z) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > cap)
            for (double& v : z) v *= cap / norm;
    };
    project();

    // Fixed mode: one candidate set per token, keyed by the token value.
    std::vector<std::vector<Index>> fixed_sets;
    if (req.fixed_negatives) {
        for (Index w : req.tokens) {
            Rng token_rng(0x9e3779b97f4a7c15ull ^ (static_cast<std::uint64_t>(w) + 1));
            std::vector<Index> cands{w};
            token_table.draw(token_rng, static_cast<std::size_t>(req.negatives), {&w, 1},
                             cands);
            fixed_sets.push_back(std::move(cands));
        }
    }

    std::vector<double> grad(dim), scores;
    std::vector<std::vector<Index>> step_sets;
    for (int step = 1; step <= req.steps; ++step) {
        const std::vector<std::vector<Index>>* sets = &fixed_sets;
        if (!req.fixed_negatives) {
            step_sets.clear();
            for (Index w : req.tokens) {
                std::vector<Index> cands{w};
                token_table.draw(rng, static_cast<std::size_t>(req.negatives), {&w, 1}, cands);
                step_sets.push_back(std::move(cands));
            }
            sets = &step_sets;
        }

        std::fill(grad.begin(), grad.end(), 0.0);
        for (const auto& cands : *sets) {
            scores.assign(cands.size(), 0.0);
            double max_s = -1e300;
            for (std::size_t i = 0; i < cands.size(); ++i) {
                const Real* row = store.word.row(cands[i]);
                double s = 0.0;
                for (Index d = 0; d < dim; ++d) s += static_cast<double>(row[d]) * z[d];
                scores[i] = s;
                max_s = std::max(max_s, s);
            }
            double denom = 0.0;
            for (double& s : scores) {
                s = std::exp(s - max_s);
                denom += s;
            }
            // grad += word[pos] - sum_v softmax_v * word[v]
            const Real* pos_row = store.word.row(cands[0]);
            for (Index d = 0; d < dim; ++d) grad[d] += static_cast<double>(pos_row[d]);
            for (std::size_t i = 0; i < cands.size(); ++i) {
                const double p = scores[i] / denom;
                const Real* row = store.word.row(cands[i]);
                for (Index d = 0; d < dim; ++d) grad[d] -= p * static_cast<double>(row[d]);
            }
        }

        const double eta = req.step_size / std::sqrt(static_cast<double>(step));
        for (Index d = 0; d < dim; ++d) z[d] += eta * grad[d];
        project();
        if (on_step) on_step(step, coldstart_objective(z, *sets, store));
    }

    std::vector<float> out(dim);
    for (Index d = 0; d < dim; ++d) out[d] = static_cast<float>(z[d]);
    return out;
}

// Maps token strings through the vocabulary; unknown tokens are dropped
// (cold items routinely carry novel tokens). Returns in-vocab indices and
// the number dropped.
inline std::pair<std::vector<Index>, std::size_t> resolve_cold_tokens(
    const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    std::vector<Index> ids;
    std::size_t dropped = 0;
    for (const auto& t : tokens) {
        Index w = vocab.item_tokens.lookup(t);
        if (w == kInvalidIndex) ++dropped;
        else ids.push_back(w);
    }
    return {ids, dropped};
}

struct ColdInferParams {
    int steps = 200;
    double step_size = 0.05;
    double norm_cap = 0.0;  // store default
    int negatives = 5;
    std::uint64_t seed = 5;
};

// Appends cold items as rows n_items().. with inferred item-in embeddings;
// evaluation protocols then restrict candidates to the trained range.
inline EmbeddingStoreT<float> augment_with_inferred(
    const EmbeddingStoreT<float>& store, const SamplingTable& token_table,
    const std::vector<std::vector<Index>>& cold_tokens, const ColdInferParams& params = {}) {
    std::vector<std::vector<float>> rows;
    rows.reserve(cold_tokens.size());
    Rng rng(params.seed);
    for (const auto& toks : cold_tokens) {
        ColdStartRequest req;
        req.tokens = toks;
        req.steps = params.steps;
        req.step_size = params.step_size;
        req.norm_cap = params.norm_cap;
        req.negatives = params.negatives;
        rows.push_back(infer_cold_item(req, store, token_table, rng));
    }
    EmbeddingStoreT<float> out = store;
    out.append_items(rows);
    return out;
}

}  // namespace cemb
