#pragma once

// Negative-sampled binary-logistic loss over complete observations and the
// asynchronous lock-free SGD loop that minimizes it.
//
// Per observation {u, i_t, ctx, tokens} the loss is
//
//   log(1+e^{-s(i_t,u)-s(i_t,ctx)})
//     + sum over drawn negative items:  log(1+e^{ s(neg,u)+s(neg,ctx)})
//   + for each of the k+1 items a (target included), for each token w of a:
//       log(1+e^{-s(w,a)}) + sum over that token's negatives log(1+e^{ s(neg,a)})
//   + for each user token x: log(1+e^{-s(x,u)}) + negatives likewise
//
// Gradients are the analytic gradients of this function; sgd_step applies
// exactly one such gradient step evaluated at the pre-step parameters
// (update order and row buffering below guarantee no partially-updated row
// is read as a gradient source).
//
// Concurrency contract (Hogwild): workers write shared tables without
// synchronization; element-wise races are accepted, word-granular writes do
// not tear. Single-thread runs are bitwise reproducible under a fixed seed;
// multi-thread results are validated through evaluation metrics only.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cemb/common.hpp"
#include "cemb/corpus.hpp"
#include "cemb/embedding_store.hpp"
#include "cemb/neg_sampler.hpp"
#include "cemb/vocab.hpp"

namespace cemb {

struct TrainConfig {
    Index epochs = 30;
    double alpha0 = 0.025;
    double lr_floor_factor = 1e-4;  // floor = alpha0 * lr_floor_factor
    int negatives = 5;
    int threads = 1;
    std::uint64_t seed = 1;
    Index dim = 32;
    Index user_dim = 0;  // 0 means same as dim
    bool tied_item_user = true;
    bool use_user_bias = true;     // ablation: "no user" when false
    bool use_item_context = true;  // ablation: "no context" when false
    bool use_user_context = true;
    double neg_sample_floor = kDefaultNegSampleFloor;

    Index effective_user_dim() const { return user_dim == 0 ? dim : user_dim; }

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
        if (alpha0 <= 0) throw std::invalid_argument("train: alpha0 must be > 0");
        if (negatives < 1) throw std::invalid_argument("train: negatives must be >= 1");
        if (threads < 1) throw std::invalid_argument("train: threads must be >= 1");
        if (tied_item_user && user_dim != 0 && user_dim != dim)
            throw std::invalid_argument("train: tied item_user_table requires user_dim == dim");
    }
};

struct LossBreakdown {
    double seq_term = 0.0;
    double item_context_term = 0.0;
    double user_context_term = 0.0;
    double total = 0.0;

    void add(const LossBreakdown& o) {
        seq_term += o.seq_term;
        item_context_term += o.item_context_term;
        user_context_term += o.user_context_term;
        total += o.total;
    }
    void scale(double s) {
        seq_term *= s;
        item_context_term *= s;
        user_context_term *= s;
        total *= s;
    }
};

// Negatives drawn for one observation visit. Token negatives are flattened,
// `per_positive` consecutive entries for each positive token, positives
// enumerated target-first then context items in context order.
struct NegativeSet {
    int per_positive = 5;
    std::vector<Index> items;
    std::vector<Index> tokens;
    std::vector<Index> ufeats;

    void clear() {
        items.clear();
        tokens.clear();
        ufeats.clear();
    }
};

// Sampling tables for the three domains; token/ufeat tables may be absent
// when the corresponding vocabulary or loss term is inactive.
struct SamplerBundle {
    SamplingTable items;
    SamplingTable tokens;
    SamplingTable ufeats;
    bool has_tokens = false;
    bool has_ufeats = false;

    static SamplerBundle build(const ObservationSet& obs, const TrainConfig& cfg) {
        SamplerBundle b;
        b.items = SamplingTable::build(obs.item_counts(), obs.total_item_count(),
                                       cfg.neg_sample_floor);
        if (cfg.use_item_context && obs.total_token_count() > 0) {
            b.tokens = SamplingTable::build(obs.token_counts(), obs.total_token_count(),
                                            cfg.neg_sample_floor);
            b.has_tokens = true;
        }
        if (cfg.use_user_context && obs.total_ufeat_count() > 0) {
            b.ufeats = SamplingTable::build(obs.ufeat_counts(), obs.total_ufeat_count(),
                                            cfg.neg_sample_floor);
            b.has_ufeats = true;
        }
        return b;
    }
};

// The positive instance of each term is excluded from its own draw; other
// positives in the observation are not.
inline void draw_negatives(const ObservationRef& obs, const Vocabulary& vocab,
                           const SamplerBundle& tables, const TrainConfig& cfg, Rng& rng,
                           NegativeSet& out) {
    out.clear();
    out.per_positive = cfg.negatives;
    const Index target = obs.target;
    tables.items.draw(rng, static_cast<std::size_t>(cfg.negatives), {&target, 1}, out.items);
    if (cfg.use_item_context && tables.has_tokens) {
        auto draw_for_item = [&](Index item) {
            for (Index w : vocab.tokens_of_item.tokens(item))
                tables.tokens.draw(rng, static_cast<std::size_t>(cfg.negatives), {&w, 1},
                                   out.tokens);
        };
        draw_for_item(target);
        for (Index c : obs.ctx) draw_for_item(c);
    }
    if (cfg.use_user_context && tables.has_ufeats) {
        for (Index x : vocab.tokens_of_user.tokens(obs.user))
            tables.ufeats.draw(rng, static_cast<std::size_t>(cfg.negatives), {&x, 1},
                               out.ufeats);
    }
}

inline double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
inline double log1pexp(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

enum class Table { ItemIn, ItemOut, ItemUser, User, Word, UserFeat };

// Per-worker scratch; reused across observations to avoid allocation.
template <typename Real>
struct TrainScratch {
    std::vector<Real> pooled;        // mean of context item-in rows
    std::vector<Real> seq_source;    // pooled (+ user row in tied biased mode)
    std::vector<Real> ctx_gradient;  // sum of factor-weighted item_out rows
    std::vector<Real> out_rows;      // buffered item_out rows, target first
    std::vector<Real> iu_rows;       // buffered item_user rows (untied)
    std::vector<Real> user_row;      // buffered user row
    std::vector<Real> in_rows;       // buffered item-in rows of target + ctx
    std::vector<double> factors;     // sequence-term logistic factors
    std::vector<double> token_factors;  // token-term factors, draw order
    std::vector<double> ufeat_factors;  // user-feature factors, draw order
};

namespace detail {

template <typename Real>
inline void copy_row(const Real* src, std::vector<Real>& dst, std::size_t at, Index dim) {
    for (Index d = 0; d < dim; ++d) dst[at + d] = src[d];
}

}  // namespace detail

// Enumerates the analytic gradient of observation_loss as calls
// sink(table, row, coeff, vec, dim) meaning  d loss / d table[row] += coeff * vec.
// Returns the loss evaluated at the current parameters.
//
// Emission order (ItemOut/ItemUser, ItemIn, User, Word, UserFeat) plus the
// row buffers in scratch guarantee that a sink applying updates in place
// never feeds an already-updated row back into a gradient source.
template <typename Real, typename Sink>
LossBreakdown for_each_gradient(const ObservationRef& obs, const NegativeSet& negs,
                                const EmbeddingStoreT<Real>& store, const TrainConfig& cfg,
                                const Vocabulary& vocab, TrainScratch<Real>& scratch,
                                Sink&& sink) {
    const Index dim = store.dim;
    const Index udim = store.user_dim;
    const bool tied = store.tied();
    const bool bias = cfg.use_user_bias;
    const std::size_t k = obs.ctx.size();
    if (k == 0) throw std::invalid_argument("observation has empty context");

    LossBreakdown loss;

    // ---- phase A: pooled context, buffered rows, scores, factors ----

    scratch.pooled.assign(dim, Real(0));
    for (Index c : obs.ctx) {
        const Real* r = store.item_in.row(c);
        for (Index d = 0; d < dim; ++d) scratch.pooled[d] += r[d];
    }
    const Real inv_k = Real(1) / static_cast<Real>(k);
    for (Index d = 0; d < dim; ++d) scratch.pooled[d] *= inv_k;

    scratch.user_row.assign(udim, Real(0));
    detail::copy_row(store.user.row(obs.user), scratch.user_row, 0, udim);

    // Sequence-term scores at the pre-step point.
    const std::size_t n_out = 1 + negs.items.size();  // target first
    scratch.out_rows.assign(n_out * dim, Real(0));
    if (!tied) scratch.iu_rows.assign(n_out * udim, Real(0));
    scratch.factors.assign(n_out, 0.0);

    auto seq_item = [&](std::size_t slot) {
        return slot == 0 ? obs.target : negs.items[slot - 1];
    };
    for (std::size_t s = 0; s < n_out; ++s) {
        const Index j = seq_item(s);
        detail::copy_row(store.item_out.row(j), scratch.out_rows, s * dim, dim);
        if (!tied) detail::copy_row(store.item_user.row(j), scratch.iu_rows, s * udim, udim);
        double q = dot(store.item_out.row(j), scratch.pooled.data(), dim);
        if (bias) q += store.score_user(j, obs.user);
        if (!std::isfinite(q))
            throw std::runtime_error(
                "non-finite score during training; the model diverged -- lower the "
                "learning rate (alpha)");
        if (s == 0) {
            loss.seq_term += log1pexp(-q);
            scratch.factors[s] = stable_sigmoid(q) - 1.0;
        } else {
            loss.seq_term += log1pexp(q);
            scratch.factors[s] = stable_sigmoid(q);
        }
    }

    // seq_source: what the item_out rows' gradients multiply.
    scratch.seq_source.assign(scratch.pooled.begin(), scratch.pooled.end());
    if (bias && tied)
        for (Index d = 0; d < dim; ++d) scratch.seq_source[d] += scratch.user_row[d];

    // ctx_gradient: sum_s factor_s * item_out_orig[s]; every context row
    // receives it scaled by 1/k.
    scratch.ctx_gradient.assign(dim, Real(0));
    for (std::size_t s = 0; s < n_out; ++s) {
        const double f = scratch.factors[s];
        const Real* row = scratch.out_rows.data() + s * dim;
        for (Index d = 0; d < dim; ++d)
            scratch.ctx_gradient[d] += static_cast<Real>(f) * row[d];
    }

    // Token terms need the pre-step item-in rows of target + context.
    const bool tokens_active = cfg.use_item_context && !negs.tokens.empty();
    const std::size_t n_items_in_obs = 1 + k;
    auto obs_item = [&](std::size_t pos) { return pos == 0 ? obs.target : obs.ctx[pos - 1]; };
    if (tokens_active) {
        scratch.in_rows.assign(n_items_in_obs * dim, Real(0));
        for (std::size_t p = 0; p < n_items_in_obs; ++p)
            detail::copy_row(store.item_in.row(obs_item(p)), scratch.in_rows, p * dim, dim);
    }

    // ---- phase B: emit gradient contributions ----

    // 1) item_out (and item_user) rows.
    for (std::size_t s = 0; s < n_out; ++s) {
        const Index j = seq_item(s);
        sink(Table::ItemOut, j, scratch.factors[s], scratch.seq_source.data(), dim);
        if (bias && !tied)
            sink(Table::ItemUser, j, scratch.factors[s], scratch.user_row.data(), udim);
    }

    // 2) item_in rows: sequence part for context positions, then token part
    //    for all k+1 positions (reads word rows, which update later).
    const double inv_k_d = 1.0 / static_cast<double>(k);
    for (Index c : obs.ctx) sink(Table::ItemIn, c, inv_k_d, scratch.ctx_gradient.data(), dim);

    // Token factors are evaluated once here, at the pre-step point, and
    // reused when the word rows themselves are updated in step 4 (a token
    // repeated across positives must not see its own earlier update).
    std::size_t tok_cursor = 0;  // walks negs.tokens in draw order
    scratch.token_factors.clear();
    if (tokens_active) {
        for (std::size_t p = 0; p < n_items_in_obs; ++p) {
            const Index a = obs_item(p);
            const Real* a_orig = scratch.in_rows.data() + p * dim;
            for (Index w : vocab.tokens_of_item.tokens(a)) {
                const double s_pos = dot(store.word.row(w), a_orig, dim);
                const double g_pos = stable_sigmoid(s_pos) - 1.0;
                loss.item_context_term += log1pexp(-s_pos);
                scratch.token_factors.push_back(g_pos);
                sink(Table::ItemIn, a, g_pos, store.word.row(w), dim);
                for (int q = 0; q < negs.per_positive; ++q) {
                    const Index wn = negs.tokens[tok_cursor + static_cast<std::size_t>(q)];
                    const double s_neg = dot(store.word.row(wn), a_orig, dim);
                    const double g_neg = stable_sigmoid(s_neg);
                    loss.item_context_term += log1pexp(s_neg);
                    scratch.token_factors.push_back(g_neg);
                    sink(Table::ItemIn, a, g_neg, store.word.row(wn), dim);
                }
                tok_cursor += static_cast<std::size_t>(negs.per_positive);
            }
        }
    }

    // 3) user row: sequence bias part (buffered out/item_user rows), then
    //    user-feature part (reads user_feat rows, which update later).
    if (bias) {
        const Real* src_base = tied ? scratch.out_rows.data() : scratch.iu_rows.data();
        const Index src_dim = tied ? dim : udim;
        for (std::size_t s = 0; s < n_out; ++s)
            sink(Table::User, obs.user, scratch.factors[s], src_base + s * src_dim, udim);
    }
    const bool ufeats_active = cfg.use_user_context && !negs.ufeats.empty();
    std::size_t ux_cursor = 0;
    scratch.ufeat_factors.clear();
    if (ufeats_active) {
        for (Index x : vocab.tokens_of_user.tokens(obs.user)) {
            const double s_pos = dot(store.user_feat.row(x), scratch.user_row.data(), udim);
            const double g_pos = stable_sigmoid(s_pos) - 1.0;
            loss.user_context_term += log1pexp(-s_pos);
            scratch.ufeat_factors.push_back(g_pos);
            sink(Table::User, obs.user, g_pos, store.user_feat.row(x), udim);
            for (int q = 0; q < negs.per_positive; ++q) {
                const Index xn = negs.ufeats[ux_cursor + static_cast<std::size_t>(q)];
                const double s_neg = dot(store.user_feat.row(xn), scratch.user_row.data(), udim);
                const double g_neg = stable_sigmoid(s_neg);
                loss.user_context_term += log1pexp(s_neg);
                scratch.ufeat_factors.push_back(g_neg);
                sink(Table::User, obs.user, g_neg, store.user_feat.row(xn), udim);
            }
            ux_cursor += static_cast<std::size_t>(negs.per_positive);
        }
    }

    // 4) word rows, sourced from the buffered pre-step item-in rows, with
    //    the factors cached in step 2.
    if (tokens_active) {
        tok_cursor = 0;
        std::size_t f = 0;
        for (std::size_t p = 0; p < n_items_in_obs; ++p) {
            const Index a = obs_item(p);
            const Real* a_orig = scratch.in_rows.data() + p * dim;
            for (Index w : vocab.tokens_of_item.tokens(a)) {
                sink(Table::Word, w, scratch.token_factors[f++], a_orig, dim);
                for (int q = 0; q < negs.per_positive; ++q) {
                    const Index wn = negs.tokens[tok_cursor + static_cast<std::size_t>(q)];
                    sink(Table::Word, wn, scratch.token_factors[f++], a_orig, dim);
                }
                tok_cursor += static_cast<std::size_t>(negs.per_positive);
            }
        }
    }

    // 5) user_feat rows, sourced from the buffered pre-step user row, with
    //    the factors cached in step 3.
    if (ufeats_active) {
        ux_cursor = 0;
        std::size_t f = 0;
        for (Index x : vocab.tokens_of_user.tokens(obs.user)) {
            sink(Table::UserFeat, x, scratch.ufeat_factors[f++], scratch.user_row.data(), udim);
            for (int q = 0; q < negs.per_positive; ++q) {
                const Index xn = negs.ufeats[ux_cursor + static_cast<std::size_t>(q)];
                sink(Table::UserFeat, xn, scratch.ufeat_factors[f++], scratch.user_row.data(), udim);
            }
            ux_cursor += static_cast<std::size_t>(negs.per_positive);
        }
    }

    loss.total = loss.seq_term + loss.item_context_term + loss.user_context_term;
    if (!std::isfinite(loss.total))
        throw std::runtime_error(
            "non-finite loss during training; the model diverged -- lower the "
            "learning rate (alpha)");
    return loss;
}

// Loss only (no gradient sinks fire besides the arithmetic shared with them).
template <typename Real>
LossBreakdown observation_loss(const ObservationRef& obs, const NegativeSet& negs,
                               const EmbeddingStoreT<Real>& store, const TrainConfig& cfg,
                               const Vocabulary& vocab) {
    TrainScratch<Real> scratch;
    return for_each_gradient(obs, negs, store, cfg, vocab, scratch,
                             [](Table, Index, double, const Real*, Index) {});
}

// Sparse analytic gradient, keyed by (table, row); for tests and diagnostics.
template <typename Real>
std::map<std::pair<Table, Index>, std::vector<double>> observation_gradients(
    const ObservationRef& obs, const NegativeSet& negs, const EmbeddingStoreT<Real>& store,
    const TrainConfig& cfg, const Vocabulary& vocab) {
    std::map<std::pair<Table, Index>, std::vector<double>> grads;
    TrainScratch<Real> scratch;
    for_each_gradient(obs, negs, store, cfg, vocab, scratch,
                      [&](Table t, Index row, double coeff, const Real* vec, Index d) {
                          auto& g = grads[{t, row}];
                          if (g.empty()) g.assign(d, 0.0);
                          for (Index i = 0; i < d; ++i)
                              g[i] += coeff * static_cast<double>(vec[i]);
                      });
    return grads;
}

// One gradient step at rate alpha on exactly the rows touched by the
// observation and its negatives. Returns the pre-step loss.
template <typename Real>
LossBreakdown sgd_step(const ObservationRef& obs, const NegativeSet& negs,
                       EmbeddingStoreT<Real>& store, double alpha, const TrainConfig& cfg,
                       const Vocabulary& vocab, TrainScratch<Real>& scratch) {
    auto row_of = [&store](Table t, Index row) -> Real* {
        switch (t) {
            case Table::ItemIn: return store.item_in.row(row);
            case Table::ItemOut: return store.item_out.row(row);
            case Table::ItemUser: return store.item_user.row(row);
            case Table::User: return store.user.row(row);
            case Table::Word: return store.word.row(row);
            case Table::UserFeat: return store.user_feat.row(row);
        }
        return nullptr;
    };
    return for_each_gradient(obs, negs, store, cfg, vocab, scratch,
                             [&](Table t, Index row, double coeff, const Real* vec, Index d) {
                                 Real* dst = row_of(t, row);
                                 const Real step = static_cast<Real>(-alpha * coeff);
                                 for (Index i = 0; i < d; ++i) dst[i] += step * vec[i];
                             });
}

// Linear decay from alpha0 to 0 over the n*e schedule, floored so tail
// updates never die completely.
inline double learning_rate(std::uint64_t step, std::uint64_t total_steps, double alpha0,
                            double floor_factor = 1e-4) {
    double a = alpha0 * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
    return std::max(a, alpha0 * floor_factor);
}

struct EpochStats {
    Index epoch = 0;
    LossBreakdown mean_loss;
    double seconds = 0.0;
};

struct TrainResult {
    EmbeddingStore store;
    std::vector<EpochStats> epochs;
    double total_seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Algorithm: shuffle the observations once, then for each epoch visit all of
// them, drawing fresh negatives per visit and stepping at the scheduled
// rate. Multi-thread mode shards each epoch's sequence into contiguous
// blocks, one per worker.
inline TrainResult train(const ObservationSet& observations, const Vocabulary& vocab,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = nullptr) {
    cfg.validate();
    if (observations.size() == 0) throw std::invalid_argument("train: no observations");

    TrainResult result;
    VocabSizes sizes{vocab.n_items(), vocab.n_users(), vocab.n_item_tokens(),
                     vocab.n_user_tokens()};
    result.store = EmbeddingStore::init(sizes, cfg.dim, cfg.effective_user_dim(),
                                        cfg.tied_item_user, cfg.seed);
    SamplerBundle tables = SamplerBundle::build(observations, cfg);

    const std::uint64_t n = observations.size();
    std::vector<std::uint64_t> order(n);
    for (std::uint64_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(cfg.seed ^ 0x517cc1b727220a95ull);
    shuffle_rng.shuffle(order);

    const int n_workers = static_cast<int>(std::min<std::uint64_t>(cfg.threads, n));
    const std::uint64_t total_steps = n * cfg.epochs;

    std::vector<Rng> worker_rngs;
    worker_rngs.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w)
        worker_rngs.emplace_back(cfg.seed + static_cast<std::uint64_t>(w));

    const auto t0 = std::chrono::steady_clock::now();
    for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto e0 = std::chrono::steady_clock::now();
        std::vector<LossBreakdown> worker_loss(n_workers);
        std::vector<std::exception_ptr> worker_error(n_workers);

        auto worker_body = [&](int w) {
            const std::uint64_t lo = n * w / n_workers;
            const std::uint64_t hi = n * (w + 1) / n_workers;
            TrainScratch<float> scratch;
            NegativeSet negs;
            try {
                for (std::uint64_t pos = lo; pos < hi; ++pos) {
                    const std::uint64_t step = static_cast<std::uint64_t>(epoch) * n + pos;
                    const double alpha =
                        learning_rate(step, total_steps, cfg.alpha0, cfg.lr_floor_factor);
                    ObservationRef obs = observations.get(order[pos]);
                    draw_negatives(obs, vocab, tables, cfg, worker_rngs[w], negs);
                    worker_loss[w].add(
                        sgd_step(obs, negs, result.store, alpha, cfg, vocab, scratch));
                }
            } catch (...) {
                worker_error[w] = std::current_exception();
            }
        };

        if (n_workers == 1) {
            worker_body(0);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(n_workers);
            for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker_body, w);
            for (auto& th : pool) th.join();
        }
        for (auto& err : worker_error)
            if (err) std::rethrow_exception(err);

        EpochStats stats;
        stats.epoch = epoch;
        for (const auto& l : worker_loss) stats.mean_loss.add(l);
        stats.mean_loss.scale(1.0 / static_cast<double>(n));
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - e0).count();
        if (!std::isfinite(stats.mean_loss.total))
            throw std::runtime_error(
                "non-finite epoch loss; the model diverged -- lower the learning rate (alpha)");
        if (on_epoch) on_epoch(stats);
        result.epochs.push_back(stats);
    }
    result.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace cemb
