#pragma once

// Ranking and classification metrics plus the paper-style evaluation
// protocols: within-basket holdout, next-purchase with day windows, and the
// linear-probe classification of item embeddings.
//
// Every protocol derives its per-query RNG from (eval seed, query id), so
// results are independent of the worker-pool size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cemb/common.hpp"
#include "cemb/corpus.hpp"
#include "cemb/embedding_store.hpp"
#include "cemb/io_util.hpp"
#include "cemb/ranker.hpp"
#include "cemb/trainer.hpp"
#include "cemb/vocab.hpp"

namespace cemb {

struct EvalTask {
    enum class Kind { WithinBasket, NextPurchase, Classification };
    Kind kind = Kind::WithinBasket;
    std::vector<Index> k_values = {5, 10};
    // Sampled negatives per positive for within-basket AUC/NDCG; 0 means
    // rank against the entire catalog.
    int negatives_per_positive = 100;
    Index d2 = 7;
    std::uint64_t seed = 12345;
    int threads = 1;
    bool with_user = false;
    // Cold-start protocol: candidates and negatives restricted to item
    // indices below this bound (the trained items); 0 means no restriction.
    Index max_candidate = 0;
    // Cap on holdout queries for the within-basket protocol (seeded uniform
    // subsample); 0 evaluates all of them. Full-catalog ranking over every
    // holdout is quadratic in corpus size, so large runs set this.
    std::size_t max_queries = 0;
};

struct EvalReport {
    std::string task;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::pair<std::string, std::string>> meta;

    void set(const std::string& name, double v) { metrics.emplace_back(name, v); }
    void note(const std::string& k, const std::string& v) { meta.emplace_back(k, v); }

    double get(const std::string& name) const {
        for (const auto& [n, v] : metrics)
            if (n == name) return v;
        throw std::out_of_range("no metric named " + name);
    }

    void write_kv(const std::string& path) const {
        std::vector<std::pair<std::string, std::string>> kv;
        kv.emplace_back("task", task);
        char buf[64];
        for (const auto& [n, v] : metrics) {
            std::snprintf(buf, sizeof buf, "%.6f", v);
            kv.emplace_back(n, buf);
        }
        for (const auto& [k, v] : meta) kv.emplace_back(k, v);
        write_kv_file(path, kv);
    }

    std::string tsv_header() const {
        std::string h = "task";
        for (const auto& [n, v] : metrics) h += "\t" + n;
        return h;
    }
    std::string tsv_line() const {
        std::string l = task;
        char buf[64];
        for (const auto& [n, v] : metrics) {
            std::snprintf(buf, sizeof buf, "\t%.6f", v);
            l += buf;
        }
        return l;
    }
};

// ---- primitive metrics ------------------------------------------------

// Fraction of (pos, neg) pairs ranked correctly; ties count one half.
inline double auc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty())
        throw std::invalid_argument("auc: both score lists must be non-empty");
    double good = 0.0;
    for (double p : pos_scores)
        for (double n : neg_scores) {
            if (p > n) good += 1.0;
            else if (p == n) good += 0.5;
        }
    return good / (static_cast<double>(pos_scores.size()) *
                   static_cast<double>(neg_scores.size()));
}

// Binary-relevance NDCG over the top K of a full ranking.
inline double ndcg_at_k(const std::vector<bool>& relevance, Index k) {
    std::size_t n_rel = 0;
    for (bool r : relevance) n_rel += r;
    if (n_rel == 0)
        throw std::invalid_argument("ndcg_at_k: no relevant item in the universe");
    double dcg = 0.0;
    const std::size_t top = std::min<std::size_t>(k, relevance.size());
    for (std::size_t r = 0; r < top; ++r)
        if (relevance[r]) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    double idcg = 0.0;
    const std::size_t ideal = std::min<std::size_t>(n_rel, k);
    for (std::size_t r = 0; r < ideal; ++r)
        idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return dcg / idcg;
}

inline int hit_at_k(const std::vector<bool>& relevance, Index k) {
    const std::size_t top = std::min<std::size_t>(k, relevance.size());
    for (std::size_t r = 0; r < top; ++r)
        if (relevance[r]) return 1;
    return 0;
}

// ---- shared worker pool -------------------------------------------------

namespace detail {

inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::uint64_t query_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = base ^ 0x2545f4914f6cdd1dull;
    h = fnv1a64(&a, 8, h);
    h = fnv1a64(&b, 8, h);
    return h;
}

}  // namespace detail

// ---- within-basket protocol ---------------------------------------------

// For each basket with >= 2 items, hold out each rankable item in turn and
// score it against sampled negatives by s(held-out, rest-of-basket). Basket
// members above max_candidate (cold items) participate as context only.
template <typename Real>
EvalReport within_basket_eval(const std::vector<std::vector<Index>>& baskets,
                              const EmbeddingStoreT<Real>& store, const EvalTask& task) {
    const Index m_cand = task.max_candidate ? task.max_candidate : store.n_items();
    struct Query {
        std::size_t basket;
        std::size_t hold;
    };
    std::vector<Query> queries;
    for (std::size_t b = 0; b < baskets.size(); ++b) {
        if (baskets[b].size() < 2) continue;
        for (std::size_t h = 0; h < baskets[b].size(); ++h)
            if (baskets[b][h] < m_cand) queries.push_back({b, h});
    }
    if (task.max_queries > 0 && queries.size() > task.max_queries) {
        Rng rng(task.seed ^ 0xabcdef1234567ull);
        rng.shuffle(queries);
        queries.resize(task.max_queries);
    }

    std::vector<double> q_auc(queries.size()), q_ndcg(queries.size());
    detail::parallel_for(queries.size(), task.threads, [&](std::size_t qi) {
        const auto& [bi, hold] = queries[qi];
        const std::vector<Index>& basket = baskets[bi];
        std::vector<Index> ctx;
        for (std::size_t i = 0; i < basket.size(); ++i)
            if (i != hold) ctx.push_back(basket[i]);

        std::vector<double> pooled(store.dim);
        store.pool(ctx, pooled.data());
        const double pos = pooled_score(store, basket[hold], pooled.data());

        auto in_basket = [&](Index j) {
            return std::find(basket.begin(), basket.end(), j) != basket.end();
        };

        std::size_t greater = 0, ties = 0, n_neg = 0;
        if (task.negatives_per_positive > 0) {
            Rng rng(detail::query_seed(task.seed, bi, hold));
            for (int s = 0; s < task.negatives_per_positive; ++s) {
                Index j;
                do {
                    j = static_cast<Index>(rng.below(m_cand));
                } while (in_basket(j));
                const double sc = pooled_score(store, j, pooled.data());
                if (sc > pos) ++greater;
                else if (sc == pos) ++ties;
                ++n_neg;
            }
        } else {
            for (Index j = 0; j < m_cand; ++j) {
                if (in_basket(j)) continue;
                const double sc = pooled_score(store, j, pooled.data());
                if (sc > pos) ++greater;
                else if (sc == pos) ++ties;
                ++n_neg;
            }
        }
        q_auc[qi] = n_neg == 0 ? 0.5
                               : 1.0 - (static_cast<double>(greater) + 0.5 * ties) /
                                           static_cast<double>(n_neg);
        const std::size_t rank = 1 + greater;
        q_ndcg[qi] = 1.0 / std::log2(static_cast<double>(rank) + 1.0);
    });

    double sum_auc = 0.0, sum_ndcg = 0.0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        sum_auc += q_auc[i];
        sum_ndcg += q_ndcg[i];
    }
    EvalReport rep;
    rep.task = "within_basket";
    const double nq = queries.empty() ? 1.0 : static_cast<double>(queries.size());
    rep.set("auc", sum_auc / nq);
    rep.set("ndcg", sum_ndcg / nq);
    rep.set("queries", static_cast<double>(queries.size()));
    rep.note("negatives_per_positive", std::to_string(task.negatives_per_positive));
    rep.note("eval_seed", std::to_string(task.seed));
    if (task.max_queries) rep.note("max_queries", std::to_string(task.max_queries));
    return rep;
}

// Test orders (>= 2 in-vocab items) grouped into baskets.
inline std::vector<std::vector<Index>> baskets_from_events(const std::vector<Event>& events) {
    std::vector<std::vector<Index>> baskets;
    std::size_t i = 0;
    while (i < events.size()) {
        std::size_t j = i;
        std::vector<Index> basket;
        while (j < events.size() && events[j].user == events[i].user &&
               events[j].order == events[i].order) {
            basket.push_back(events[j].item);
            ++j;
        }
        if (basket.size() >= 2) baskets.push_back(std::move(basket));
        i = j;
    }
    return baskets;
}

// ---- next-purchase protocol ----------------------------------------------

// Context: each user's purchases within d1 days at the test cutoff
// (valid_end); labels: that user's purchases within the next d2 days. Items
// are ranked over the full candidate set with or without the user term.
template <typename Real>
EvalReport next_purchase_eval(const SplitResult& splits, const SplitSpec& spec,
                              const EmbeddingStoreT<Real>& store, const EvalTask& task) {
    if (spec.mode != SplitMode::TimeCutoff)
        throw std::invalid_argument("next_purchase_eval requires a time-cutoff split");
    const std::int64_t cutoff = spec.valid_end;
    const std::int64_t ctx_lo = cutoff - static_cast<std::int64_t>(spec.d1) * kSecondsPerDay;
    const std::int64_t label_hi = cutoff + static_cast<std::int64_t>(task.d2) * kSecondsPerDay;

    struct UserQuery {
        std::vector<std::pair<std::int64_t, Index>> ctx;  // (time, item)
        std::vector<Index> labels;
    };
    std::map<Index, UserQuery> per_user;
    auto add_ctx = [&](const std::vector<Event>& ev) {
        for (const Event& e : ev)
            if (e.time > ctx_lo && e.time <= cutoff) per_user[e.user].ctx.emplace_back(e.time, e.item);
    };
    add_ctx(splits.train);
    add_ctx(splits.valid);
    for (const Event& e : splits.test)
        if (e.time <= label_hi) per_user[e.user].labels.push_back(e.item);

    std::vector<std::pair<Index, const UserQuery*>> queries;
    for (const auto& [u, q] : per_user)
        if (!q.ctx.empty() && !q.labels.empty()) queries.emplace_back(u, &q);

    const Index k_max = *std::max_element(task.k_values.begin(), task.k_values.end());
    std::vector<std::map<Index, double>> q_hit(queries.size()), q_ndcg(queries.size());

    detail::parallel_for(queries.size(), task.threads, [&](std::size_t qi) {
        const auto& [u, uq] = queries[qi];
        Query q;
        q.k = k_max;
        // most recent first
        std::vector<std::pair<std::int64_t, Index>> ctx = uq->ctx;
        std::stable_sort(ctx.begin(), ctx.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (const auto& [t, item] : ctx) q.context_items.push_back(item);
        if (task.with_user) q.user = u;
        RankedList ranked = task.with_user ? rank_with_user(q, store)
                                           : rank_by_complement(q, store);

        std::vector<bool> rel(ranked.size(), false);
        std::size_t n_rel_in_universe = 0;
        std::vector<Index> uniq_labels = uq->labels;
        std::sort(uniq_labels.begin(), uniq_labels.end());
        uniq_labels.erase(std::unique(uniq_labels.begin(), uniq_labels.end()),
                          uniq_labels.end());
        n_rel_in_universe = uniq_labels.size();
        for (std::size_t r = 0; r < ranked.size(); ++r)
            rel[r] = std::binary_search(uniq_labels.begin(), uniq_labels.end(),
                                        ranked[r].item);
        for (Index k : task.k_values) {
            q_hit[qi][k] = hit_at_k(rel, k);
            double dcg = 0.0;
            const std::size_t top = std::min<std::size_t>(k, rel.size());
            for (std::size_t r = 0; r < top; ++r)
                if (rel[r]) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
            double idcg = 0.0;
            for (std::size_t r = 0; r < std::min<std::size_t>(n_rel_in_universe, k); ++r)
                idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
            q_ndcg[qi][k] = idcg > 0 ? dcg / idcg : 0.0;
        }
    });

    EvalReport rep;
    rep.task = task.with_user ? "next_purchase_user" : "next_purchase";
    for (Index k : task.k_values) {
        double hit = 0.0, ndcg = 0.0;
        for (std::size_t qi = 0; qi < queries.size(); ++qi) {
            hit += q_hit[qi][k];
            ndcg += q_ndcg[qi][k];
        }
        const double nq = queries.empty() ? 1.0 : static_cast<double>(queries.size());
        rep.set("hit@" + std::to_string(k), hit / nq);
        rep.set("ndcg@" + std::to_string(k), ndcg / nq);
    }
    rep.set("queries", static_cast<double>(queries.size()));
    rep.note("d1", std::to_string(spec.d1));
    rep.note("d2", std::to_string(task.d2));
    return rep;
}

// ---- classification probe -------------------------------------------------

namespace detail {

// Binary logistic regression with L2 on the weights (bias unregularized),
// batch gradient descent with backtracking, run to |delta objective| < tol.
struct BinaryLr {
    std::vector<double> w;  // dim + 1, bias last

    static double objective(const std::vector<const float*>& xs, const std::vector<int>& ys,
                            std::size_t dim, double lambda, const std::vector<double>& w) {
        double obj = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double m = w[dim];
            for (std::size_t d = 0; d < dim; ++d) m += w[d] * xs[i][d];
            obj += log1pexp(-ys[i] * m);
        }
        obj /= static_cast<double>(xs.size());
        for (std::size_t d = 0; d < dim; ++d) obj += lambda * w[d] * w[d];
        return obj;
    }

    static BinaryLr fit(const std::vector<const float*>& xs, const std::vector<int>& ys,
                        std::size_t dim, double lambda, int max_iter = 500,
                        double tol = 1e-6) {
        BinaryLr lr;
        lr.w.assign(dim + 1, 0.0);
        std::vector<double> grad(dim + 1), trial(dim + 1);
        double step = 1.0;
        double obj = objective(xs, ys, dim, lambda, lr.w);
        for (int it = 0; it < max_iter; ++it) {
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = 0; i < xs.size(); ++i) {
                double m = lr.w[dim];
                for (std::size_t d = 0; d < dim; ++d) m += lr.w[d] * xs[i][d];
                const double g = -ys[i] * stable_sigmoid(-ys[i] * m);
                for (std::size_t d = 0; d < dim; ++d) grad[d] += g * xs[i][d];
                grad[dim] += g;
            }
            const double inv_n = 1.0 / static_cast<double>(xs.size());
            for (double& g : grad) g *= inv_n;
            for (std::size_t d = 0; d < dim; ++d) grad[d] += 2.0 * lambda * lr.w[d];

            double next_obj = obj;
            for (int bt = 0; bt < 40; ++bt) {
                for (std::size_t d = 0; d <= dim; ++d) trial[d] = lr.w[d] - step * grad[d];
                next_obj = objective(xs, ys, dim, lambda, trial);
                if (next_obj <= obj) break;
                step *= 0.5;
            }
            if (next_obj > obj) break;  // no descent direction left
            lr.w = trial;
            const double delta = obj - next_obj;
            obj = next_obj;
            step *= 1.3;  // recover from over-conservative backtracking
            if (delta < tol) break;
        }
        return lr;
    }

    double score(const float* x, std::size_t dim) const {
        double m = w[dim];
        for (std::size_t d = 0; d < dim; ++d) m += w[d] * x[d];
        return m;
    }
};

struct F1Result {
    double micro = 0.0, macro = 0.0;
};

inline F1Result micro_macro_f1(const std::vector<Index>& truth,
                               const std::vector<Index>& pred, Index n_classes) {
    std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (pred[i] == truth[i]) tp[truth[i]]++;
        else {
            if (pred[i] != kInvalidIndex) fp[pred[i]]++;
            fn[truth[i]]++;
        }
    }
    std::size_t sum_tp = 0, sum_fp = 0, sum_fn = 0;
    double macro = 0.0;
    std::size_t macro_classes = 0;
    std::vector<bool> in_test(n_classes, false);
    for (Index t : truth) in_test[t] = true;
    for (Index c = 0; c < n_classes; ++c) {
        sum_tp += tp[c];
        sum_fp += fp[c];
        sum_fn += fn[c];
        if (!in_test[c] && fp[c] == 0) continue;  // class absent everywhere
        ++macro_classes;
        const double denom = 2.0 * tp[c] + fp[c] + fn[c];
        macro += denom > 0 ? 2.0 * tp[c] / denom : 0.0;
    }
    F1Result r;
    const double micro_denom = 2.0 * sum_tp + sum_fp + sum_fn;
    r.micro = micro_denom > 0 ? 2.0 * sum_tp / micro_denom : 0.0;
    r.macro = macro_classes > 0 ? macro / static_cast<double>(macro_classes) : 0.0;
    return r;
}

}  // namespace detail

struct ProbeConfig {
    double label_fraction = 0.5;
    std::uint64_t seed = 7;
    std::vector<double> lambda_grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
    int cv_folds = 5;
    int max_iter = 500;
    double tol = 1e-6;
    int threads = 1;
};

// One-vs-all linear logistic probe on item-in embeddings. Returns micro/
// macro F1 on the held-out half; L2 strength picked by k-fold CV accuracy
// on the training half.
template <typename Real>
EvalReport classification_probe(const EmbeddingStoreT<Real>& store,
                                const std::vector<Index>& labels, Index n_classes,
                                const ProbeConfig& cfg = {}) {
    static_assert(std::is_same_v<Real, float>, "probe expects the float store");
    const Index m = store.n_items();
    if (labels.size() != m)
        throw std::invalid_argument("classification_probe: one label per item required");
    const std::size_t dim = store.dim;

    std::vector<Index> order(m);
    for (Index i = 0; i < m; ++i) order[i] = i;
    Rng rng(cfg.seed);
    rng.shuffle(order);
    const std::size_t n_train =
        static_cast<std::size_t>(static_cast<double>(m) * cfg.label_fraction);
    std::vector<Index> train_items(order.begin(), order.begin() + n_train);
    std::vector<Index> test_items(order.begin() + n_train, order.end());
    if (train_items.empty() || test_items.empty())
        throw std::invalid_argument("classification_probe: split produced an empty half");

    auto fit_all = [&](const std::vector<Index>& items, double lambda) {
        // Returns per-class classifiers; classes without positives get none.
        std::vector<std::optional<detail::BinaryLr>> clf(n_classes);
        std::vector<const float*> xs(items.size());
        for (std::size_t i = 0; i < items.size(); ++i) xs[i] = store.item_in.row(items[i]);
        std::vector<bool> has_pos(n_classes, false);
        for (Index it : items) has_pos[labels[it]] = true;
        detail::parallel_for(n_classes, cfg.threads, [&](std::size_t c) {
            if (!has_pos[c]) return;
            std::vector<int> ys(items.size());
            for (std::size_t i = 0; i < items.size(); ++i)
                ys[i] = labels[items[i]] == static_cast<Index>(c) ? 1 : -1;
            clf[c] = detail::BinaryLr::fit(xs, ys, dim, lambda, cfg.max_iter, cfg.tol);
        });
        return clf;
    };

    auto predict = [&](const std::vector<std::optional<detail::BinaryLr>>& clf, Index item) {
        double best = -1e300;
        Index arg = kInvalidIndex;
        for (Index c = 0; c < n_classes; ++c) {
            if (!clf[c]) continue;
            const double s = clf[c]->score(store.item_in.row(item), dim);
            if (arg == kInvalidIndex || s > best) {
                best = s;
                arg = c;
            }
        }
        return arg;
    };

    // lambda by k-fold CV accuracy on the training half.
    double best_lambda = cfg.lambda_grid.front();
    double best_acc = -1.0;
    for (double lambda : cfg.lambda_grid) {
        std::size_t correct = 0, total = 0;
        for (int fold = 0; fold < cfg.cv_folds; ++fold) {
            std::vector<Index> fit_items, val_items;
            for (std::size_t i = 0; i < train_items.size(); ++i)
                (static_cast<int>(i % cfg.cv_folds) == fold ? val_items : fit_items)
                    .push_back(train_items[i]);
            if (fit_items.empty() || val_items.empty()) continue;
            auto clf = fit_all(fit_items, lambda);
            for (Index it : val_items) {
                correct += predict(clf, it) == labels[it];
                ++total;
            }
        }
        const double acc = total ? static_cast<double>(correct) / total : 0.0;
        if (acc > best_acc) {
            best_acc = acc;
            best_lambda = lambda;
        }
    }

    auto clf = fit_all(train_items, best_lambda);
    std::size_t missing = 0;
    for (Index c = 0; c < n_classes; ++c) missing += !clf[c];

    std::vector<Index> truth, pred;
    truth.reserve(test_items.size());
    pred.reserve(test_items.size());
    for (Index it : test_items) {
        truth.push_back(labels[it]);
        pred.push_back(predict(clf, it));
    }
    detail::F1Result f1 = detail::micro_macro_f1(truth, pred, n_classes);

    EvalReport rep;
    rep.task = "classification";
    rep.set("micro_f1", f1.micro);
    rep.set("macro_f1", f1.macro);
    rep.set("lambda", best_lambda);
    rep.set("classes", static_cast<double>(n_classes));
    if (missing)
        rep.note("warning", std::to_string(missing) +
                                " class(es) absent from the training half are never predicted");
    return rep;
}

// ---- cold-start evaluation ------------------------------------------------

// Assigns each cold item the index of its maximum-Jaccard trained item
// (ties to the lower index; all-zero similarity picks item 0).
inline std::vector<Index> assign_by_jaccard(
    const std::vector<std::vector<Index>>& cold_token_sets, const Vocabulary& vocab) {
    const Index m = vocab.n_items();
    std::vector<std::vector<Index>> trained_sets(m);
    for (Index i = 0; i < m; ++i) {
        auto toks = vocab.tokens_of_item.tokens(i);
        trained_sets[i].assign(toks.begin(), toks.end());
        std::sort(trained_sets[i].begin(), trained_sets[i].end());
        trained_sets[i].erase(
            std::unique(trained_sets[i].begin(), trained_sets[i].end()),
            trained_sets[i].end());
    }
    std::vector<Index> out;
    out.reserve(cold_token_sets.size());
    for (const auto& raw : cold_token_sets) {
        std::vector<Index> cold = raw;
        std::sort(cold.begin(), cold.end());
        cold.erase(std::unique(cold.begin(), cold.end()), cold.end());
        double best = -1.0;
        Index arg = 0;
        for (Index i = 0; i < m; ++i) {
            const auto& trained = trained_sets[i];
            std::size_t inter = 0;
            std::size_t a = 0, b = 0;
            while (a < cold.size() && b < trained.size()) {
                if (cold[a] == trained[b]) { ++inter; ++a; ++b; }
                else if (cold[a] < trained[b]) ++a;
                else ++b;
            }
            const std::size_t uni = cold.size() + trained.size() - inter;
            const double j = uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
            if (j > best) {
                best = j;
                arg = i;
            }
        }
        out.push_back(arg);
    }
    return out;
}

// Cold items appended as rows M_trained.. with max-Jaccard embeddings; run
// the requested eval on the result with task.max_candidate = M_trained.
inline EmbeddingStore augment_with_jaccard(const EmbeddingStore& store,
                                           const Vocabulary& vocab,
                                           const std::vector<std::vector<Index>>& cold_tokens) {
    auto assign = assign_by_jaccard(cold_tokens, vocab);
    std::vector<std::vector<float>> rows;
    rows.reserve(assign.size());
    for (Index src : assign) {
        const float* r = store.item_in.row(src);
        rows.emplace_back(r, r + store.dim);
    }
    EmbeddingStore out = store;
    out.append_items(rows);
    return out;
}

}  // namespace cemb
