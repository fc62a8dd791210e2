#pragma once

// Top-K complementary-item recommendation over a trained store.
//
// Criterion 1 scores candidates by s(j, ctx) alone; criterion 2 adds the
// user preference s(j, u); the two-stage mode recalls a pool by criterion 1
// and reorders it by criterion 2. Ties break toward the lower item index so
// orderings are total and reproducible.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cemb/common.hpp"
#include "cemb/embedding_store.hpp"

namespace cemb {

struct Query {
    std::vector<Index> context_items;
    std::optional<Index> user;
    Index k = 10;
    Index recall_pool = 100;
    // Candidate allowlist; empty means the full catalog. Context items are
    // always excluded.
    std::vector<Index> candidates;
};

struct ScoredItem {
    Index item = 0;
    double score = 0.0;
};

using RankedList = std::vector<ScoredItem>;

namespace detail {

inline bool better(const ScoredItem& a, const ScoredItem& b) {
    return a.score != b.score ? a.score > b.score : a.item < b.item;
}

template <typename Real, typename ScoreFn>
RankedList top_k_by(const Query& q, const EmbeddingStoreT<Real>& store, Index k,
                    ScoreFn&& score) {
    if (q.context_items.empty()) throw std::invalid_argument("rank: empty context");
    std::vector<double> pooled(store.dim);
    store.pool(q.context_items, pooled.data());

    auto excluded = [&](Index j) {
        return std::find(q.context_items.begin(), q.context_items.end(), j) !=
               q.context_items.end();
    };

    RankedList all;
    if (q.candidates.empty()) {
        const Index m = store.n_items();
        all.reserve(m);
        for (Index j = 0; j < m; ++j)
            if (!excluded(j)) all.push_back({j, score(j, pooled.data())});
    } else {
        all.reserve(q.candidates.size());
        for (Index j : q.candidates)
            if (!excluded(j)) all.push_back({j, score(j, pooled.data())});
    }
    const std::size_t want = std::min<std::size_t>(k, all.size());
    std::partial_sort(all.begin(), all.begin() + want, all.end(), better);
    all.resize(want);
    return all;
}

}  // namespace detail

template <typename Real>
double pooled_score(const EmbeddingStoreT<Real>& store, Index j, const double* pooled) {
    const Real* zj = store.item_out.row(j);
    double s = 0.0;
    for (Index d = 0; d < store.dim; ++d) s += static_cast<double>(zj[d]) * pooled[d];
    return s;
}

template <typename Real>
RankedList rank_by_complement(const Query& q, const EmbeddingStoreT<Real>& store) {
    return detail::top_k_by(q, store, q.k, [&](Index j, const double* pooled) {
        return pooled_score(store, j, pooled);
    });
}

template <typename Real>
RankedList rank_with_user(const Query& q, const EmbeddingStoreT<Real>& store) {
    if (!q.user)
        throw std::invalid_argument(
            "rank_with_user: query has no user; use rank_by_complement");
    const Index u = *q.user;
    return detail::top_k_by(q, store, q.k, [&](Index j, const double* pooled) {
        return pooled_score(store, j, pooled) + store.score_user(j, u);
    });
}

// Recall a pool by the complement-only criterion, reorder it by the full
// criterion, return the top k of the reordered pool.
template <typename Real>
RankedList recall_rerank(const Query& q, const EmbeddingStoreT<Real>& store) {
    if (!q.user)
        throw std::invalid_argument(
            "recall_rerank: query has no user; use rank_by_complement");
    if (q.recall_pool < q.k)
        throw std::invalid_argument("recall_rerank: recall_pool must be >= k");
    Query recall = q;
    recall.k = q.recall_pool;
    RankedList pool = rank_by_complement(recall, store);

    const Index u = *q.user;
    std::vector<double> pooled(store.dim);
    store.pool(q.context_items, pooled.data());
    for (ScoredItem& s : pool)
        s.score = pooled_score(store, s.item, pooled.data()) + store.score_user(s.item, u);
    std::sort(pool.begin(), pool.end(), detail::better);
    if (pool.size() > q.k) pool.resize(q.k);
    return pool;
}

}  // namespace cemb
