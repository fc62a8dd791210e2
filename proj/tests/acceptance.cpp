// Acceptance suite: one line per criterion, [PASS]/[FAIL]/[SKIP].
//
// Criteria 5-7 reproduce published Instacart numbers and need the public
// dataset. Point CEMB_INSTACART_DIR at a directory containing orders.tsv,
// item_context.tsv and labels_department.tsv (see scripts/instacart_to_tsv.py);
// without it those criteria are reported as SKIP with the reason.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "cemb/coldstart.hpp"
#include "cemb/corpus.hpp"
#include "cemb/evaluator.hpp"
#include "cemb/ranker.hpp"
#include "cemb/synth.hpp"
#include "cemb/trainer.hpp"

using namespace cemb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    enum Kind { Pass, Fail, Skip } kind;
    std::string detail;
};

int g_failures = 0;

void report(int number, const std::string& title, const Outcome& o) {
    const char* tag = o.kind == Outcome::Pass ? "[PASS]"
                      : o.kind == Outcome::Fail ? "[FAIL]"
                                                : "[SKIP]";
    std::printf("%s criterion %d: %s -- %s\n", tag, number, title.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (o.kind == Outcome::Fail) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = fs::temp_directory_path() / ("cemb_accept_" + tag + "_" +
                                             std::to_string(::getpid()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

// Uniform negatives excluding the positive, for the gradient criteria.
NegativeSet uniform_negatives(const ObservationRef& obs, const Vocabulary& vocab,
                              const TrainConfig& cfg, Rng& rng) {
    NegativeSet negs;
    negs.per_positive = cfg.negatives;
    auto draw = [&](Index bound, Index exclude, std::vector<Index>& out) {
        for (int q = 0; q < cfg.negatives; ++q) {
            Index v;
            do {
                v = static_cast<Index>(rng.below(bound));
            } while (bound > 1 && v == exclude);
            out.push_back(v);
        }
    };
    draw(vocab.n_items(), obs.target, negs.items);
    if (cfg.use_item_context && vocab.n_item_tokens() > 0) {
        auto per_item = [&](Index item) {
            for (Index w : vocab.tokens_of_item.tokens(item))
                draw(vocab.n_item_tokens(), w, negs.tokens);
        };
        per_item(obs.target);
        for (Index c : obs.ctx) per_item(c);
    }
    if (cfg.use_user_context && vocab.n_user_tokens() > 0)
        for (Index x : vocab.tokens_of_user.tokens(obs.user))
            draw(vocab.n_user_tokens(), x, negs.ufeats);
    return negs;
}

Vocabulary grad_vocab(Index m, Index n, Index n_w, Index n_x) {
    Vocabulary v;
    for (Index i = 0; i < m; ++i) v.items.intern("i" + std::to_string(i));
    for (Index u = 0; u < n; ++u) v.users.intern("u" + std::to_string(u));
    for (Index w = 0; w < n_w; ++w) v.item_tokens.intern("w" + std::to_string(w));
    for (Index x = 0; x < n_x; ++x) v.user_tokens.intern("x" + std::to_string(x));
    for (Index i = 0; i < m; ++i)
        v.tokens_of_item.append_owner(std::vector<Index>{i % n_w, (i * 3 + 1) % n_w});
    for (Index u = 0; u < n; ++u)
        v.tokens_of_user.append_owner(std::vector<Index>{u % n_x});
    return v;
}

double* store_entry(EmbeddingStoreT<double>& s, Table t, Index row, Index d) {
    switch (t) {
        case Table::ItemIn: return s.item_in.row(row) + d;
        case Table::ItemOut: return s.item_out.row(row) + d;
        case Table::ItemUser: return s.item_user.row(row) + d;
        case Table::User: return s.user.row(row) + d;
        case Table::Word: return s.word.row(row) + d;
        case Table::UserFeat: return s.user_feat.row(row) + d;
    }
    return nullptr;
}

void randomize(EmbeddingStoreT<double>& s, std::uint64_t seed) {
    Rng rng(seed);
    auto fill = [&](Mat<double>& m) {
        for (double& v : m.data) v = rng.uniform(-0.5, 0.5);
    };
    fill(s.item_in);
    fill(s.item_out);
    fill(s.user);
    fill(s.item_user);
    fill(s.word);
    fill(s.user_feat);
}

// ---- criterion 1 ---------------------------------------------------------

Outcome criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const Index m = 15, n = 6, n_w = 9, n_x = 4, dim = 6;
    Vocabulary vocab = grad_vocab(m, n, n_w, n_x);
    Rng rng(4242);
    const double h = 1e-4;
    double worst = 0.0;
    std::size_t checked = 0;
    std::set<int> tables_seen;
    for (int trial = 0; trial < 100; ++trial) {
        EmbeddingStoreT<double> store;
        store.dim = dim;
        store.user_dim = dim;
        store.item_in.resize(m, dim);
        store.item_out.resize(m, dim);
        store.user.resize(n, dim);
        store.word.resize(n_w, dim);
        store.user_feat.resize(n_x, dim);
        randomize(store, 9000 + trial);

        TrainConfig cfg;
        cfg.dim = dim;
        std::vector<Index> ctx;
        const std::size_t k = 1 + rng.below(3);
        for (std::size_t q = 0; q < k; ++q) ctx.push_back(static_cast<Index>(rng.below(m)));
        ObservationRef obs{static_cast<Index>(rng.below(n)),
                           static_cast<Index>(rng.below(m)), ctx};
        NegativeSet negs = uniform_negatives(obs, vocab, cfg, rng);
        auto grads = observation_gradients(obs, negs, store, cfg, vocab);
        for (const auto& [key, grad] : grads) {
            tables_seen.insert(static_cast<int>(key.first));
            for (Index d = 0; d < dim; ++d) {
                double* p = store_entry(store, key.first, key.second, d);
                const double orig = *p;
                *p = orig + h;
                const double up = observation_loss(obs, negs, store, cfg, vocab).total;
                *p = orig - h;
                const double down = observation_loss(obs, negs, store, cfg, vocab).total;
                *p = orig;
                const double fd = (up - down) / (2.0 * h);
                const double scale = std::max({std::abs(grad[d]), std::abs(fd), 1e-3});
                worst = std::max(worst, std::abs(grad[d] - fd) / scale);
                ++checked;
            }
        }
    }
    const double secs = seconds_since(t0);
    const bool five_tables = tables_seen.size() >= 5;
    if (worst <= 1e-4 && secs < 60.0 && five_tables)
        return {Outcome::Pass, fmt("%zu partials over 100 observations, worst rel err "
                                   "%.2e, %.1fs",
                                   checked, worst, secs)};
    return {Outcome::Fail, fmt("worst rel err %.2e (tol 1e-4), tables=%zu, %.1fs", worst,
                               tables_seen.size(), secs)};
}

// ---- criterion 2 ---------------------------------------------------------

Outcome criterion_logreg_equivalence() {
    Rng rng(777);
    const Index m = 12, n = 5, dim = 5;
    double worst = 0.0;
    for (int instance = 0; instance < 20; ++instance) {
        Vocabulary vocab = grad_vocab(m, n, 4, 2);
        EmbeddingStoreT<double> store;
        store.dim = dim;
        store.user_dim = dim;
        store.item_in.resize(m, dim);
        store.item_out.resize(m, dim);
        store.user.resize(n, dim);
        store.item_user.resize(m, dim);  // untied: b_{j,u} is fixed
        store.word.resize(4, dim);
        store.user_feat.resize(2, dim);
        randomize(store, 31000 + instance);

        TrainConfig cfg;
        cfg.dim = dim;
        cfg.negatives = 3;
        cfg.tied_item_user = false;
        const Index j = static_cast<Index>(rng.below(m));

        std::vector<double> lib_grad(dim, 0.0), lr_grad(dim, 0.0);
        for (int q = 0; q < 8; ++q) {
            const bool as_positive = q < 4;
            std::vector<Index> ctx{static_cast<Index>(rng.below(m))};
            Index target = j;
            if (!as_positive)
                do {
                    target = static_cast<Index>(rng.below(m));
                } while (target == j);
            ObservationRef obs{static_cast<Index>(rng.below(n)), target, ctx};
            NegativeSet negs;
            negs.per_positive = cfg.negatives;
            if (as_positive) {
                for (int t = 0; t < cfg.negatives; ++t) {
                    Index v;
                    do {
                        v = static_cast<Index>(rng.below(m));
                    } while (v == j);
                    negs.items.push_back(v);
                }
            } else {
                negs.items.push_back(j);
                for (int t = 1; t < cfg.negatives; ++t)
                    negs.items.push_back(static_cast<Index>(rng.below(m)));
            }
            auto per_item = [&](Index item) {
                for (Index w : vocab.tokens_of_item.tokens(item))
                    for (int t = 0; t < cfg.negatives; ++t)
                        negs.tokens.push_back(static_cast<Index>((w + t + 1) % 4));
            };
            per_item(obs.target);
            for (Index c : obs.ctx) per_item(c);
            for (Index x : vocab.tokens_of_user.tokens(obs.user))
                for (int t = 0; t < cfg.negatives; ++t)
                    negs.ufeats.push_back(static_cast<Index>((x + t + 1) % 2));

            auto grads = observation_gradients(obs, negs, store, cfg, vocab);
            if (auto it = grads.find({Table::ItemOut, j}); it != grads.end())
                for (Index d = 0; d < dim; ++d) lib_grad[d] += it->second[d];

            const double b = dot(store.item_user.row(j), store.user.row(obs.user), dim);
            const double* x = store.item_in.row(obs.ctx[0]);
            if (obs.target == j) {
                const double mm = b + dot(store.item_out.row(j), x, dim);
                const double g = stable_sigmoid(mm) - 1.0;
                for (Index d = 0; d < dim; ++d) lr_grad[d] += g * x[d];
            }
            for (Index neg : negs.items) {
                if (neg != j) continue;
                const double mm = b + dot(store.item_out.row(j), x, dim);
                const double g = stable_sigmoid(mm);
                for (Index d = 0; d < dim; ++d) lr_grad[d] += g * x[d];
            }
        }
        for (Index d = 0; d < dim; ++d)
            worst = std::max(worst, std::abs(lib_grad[d] - lr_grad[d]));
    }
    if (worst <= 1e-10)
        return {Outcome::Pass, fmt("20 instances, max gradient gap %.2e", worst)};
    return {Outcome::Fail, fmt("max gradient gap %.2e exceeds 1e-10", worst)};
}

// ---- criterion 3 ---------------------------------------------------------

double gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, hh = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        hh *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - gln) * hh;
}

Outcome criterion_sampler() {
    // Zipf counts plus one item pinned exactly at the floor frequency:
    // count 1 of total 100000 gives f = 1e-5 bit-exactly.
    const std::size_t n_zipf = 300;
    std::vector<Count> counts(n_zipf + 1);
    Count total = 0;
    for (std::size_t i = 0; i < n_zipf; ++i) {
        counts[i] = static_cast<Count>(3000.0 / static_cast<double>(i + 1)) + 10;
        total += counts[i];
    }
    counts[n_zipf] = 1;
    total += 1;
    // rescale the largest count so the total is exactly 100000
    if (total < 100000) {
        counts[0] += 100000 - total;
    } else {
        counts[0] -= total - 100000;
    }
    total = 100000;

    auto table = SamplingTable::build(counts, total);
    if (table.probability(n_zipf) != 0.0)
        return {Outcome::Fail, "boundary item did not get weight zero"};

    Rng rng(20240);
    const std::uint64_t n_draws = 1000000;
    std::vector<std::uint64_t> observed(counts.size(), 0);
    for (std::uint64_t i = 0; i < n_draws; ++i) observed[table.draw(rng)]++;
    if (observed[n_zipf] != 0)
        return {Outcome::Fail, fmt("boundary item drawn %llu times",
                                   static_cast<unsigned long long>(observed[n_zipf]))};

    double stat = 0.0;
    std::size_t bins = 0;
    for (std::size_t i = 0; i < n_zipf; ++i) {
        const double expect = table.probability(i) * static_cast<double>(n_draws);
        if (expect < 5.0) continue;
        const double d = static_cast<double>(observed[i]) - expect;
        stat += d * d / expect;
        ++bins;
    }
    const double pvalue = 1.0 - gamma_p(static_cast<double>(bins - 1) / 2.0, stat / 2.0);
    if (pvalue > 0.001)
        return {Outcome::Pass, fmt("chi2=%.1f over %zu bins, p=%.4f; boundary item drawn 0 "
                                   "times in 1e6 draws",
                                   stat, bins, pvalue)};
    return {Outcome::Fail, fmt("chi-square p=%.5f at alpha=0.001 (stat %.1f, %zu bins)",
                               pvalue, stat, bins)};
}

// ---- criterion 4 ---------------------------------------------------------

struct SynthTrained {
    SynthCorpus corpus;
    Vocabulary vocab;
    SplitResult splits;
    EmbeddingStore store;
    double train_seconds = 0.0;
    Index vidx(Index synth_id) const {
        return vocab.items.lookup(SynthCorpus::item_name(synth_id));
    }
};

SynthTrained train_synth(const SynthSpec& sp, const TrainConfig& base_cfg,
                         const std::string& tag) {
    SynthTrained t;
    t.corpus = generate_synthetic(sp);
    TempDir dir(tag);
    t.corpus.write_orders(dir.file("orders.tsv"));
    t.corpus.write_item_context(dir.file("ctx.tsv"));
    auto ing = ingest(dir.file("orders.tsv"), dir.file("ctx.tsv"), std::nullopt, 1);
    t.vocab = std::move(ing.vocab);
    SplitSpec spec;
    spec.k = 2;
    t.splits = split(ing.events, spec);
    auto obs = build_observations(t.splits.train, spec, t.vocab);
    auto result = train(obs, t.vocab, base_cfg);
    t.store = std::move(result.store);
    t.train_seconds = result.total_seconds;
    return t;
}

Outcome criterion_synthetic_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    SynthSpec sp;  // 500 items / 2000 users, defaults
    sp.seed = 424242;
    TrainConfig cfg;
    cfg.dim = 32;
    cfg.epochs = 30;
    cfg.seed = 11;
    cfg.threads = static_cast<int>(
        std::clamp(std::thread::hardware_concurrency(), 1u, 8u));
    auto t = train_synth(sp, cfg, "crit4");

    int hit1 = 0, n = 0, rev_hits = 0;
    for (const auto& p : t.corpus.pairs) {
        const Index a = t.vidx(p.source), b = t.vidx(p.target);
        if (a == kInvalidIndex || b == kInvalidIndex) continue;
        ++n;
        Query q;
        q.context_items = {a};
        q.k = 1;
        auto top = rank_by_complement(q, t.store);
        hit1 += !top.empty() && top[0].item == b;
        Query qr;
        qr.context_items = {b};
        qr.k = 10;
        for (const auto& si : rank_by_complement(qr, t.store)) rev_hits += si.item == a;
    }
    const double hit1_rate = static_cast<double>(hit1) / n;
    const double rev_rate = static_cast<double>(rev_hits) / n;
    const double chance10 = 10.0 / static_cast<double>(t.vocab.n_items() - 1);

    int combo_ok = 0, nc = 0;
    for (const auto& cb : t.corpus.combos) {
        const Index a = t.vidx(cb.a), c = t.vidx(cb.c), d = t.vidx(cb.d);
        const Index b = t.vidx(t.corpus.pairs[cb.a].target);
        if (a == kInvalidIndex || c == kInvalidIndex || d == kInvalidIndex ||
            b == kInvalidIndex)
            continue;
        ++nc;
        std::vector<Index> ctx{a, c};
        combo_ok += t.store.score_seq(d, ctx) > t.store.score_seq(b, ctx);
    }
    const double combo_rate = static_cast<double>(combo_ok) / nc;
    const double secs = seconds_since(t0);

    const bool ok = hit1_rate >= 0.9 && rev_rate <= 5.0 * chance10 && combo_rate >= 0.8 &&
                    secs <= 300.0;
    const std::string detail =
        fmt("hit@1=%.3f (>=0.9), reverse hit@10=%.3f (<=%.3f), combo=%.2f (>=0.8), "
            "%.0fs (<=300)",
            hit1_rate, rev_rate, 5.0 * chance10, combo_rate, secs);
    return {ok ? Outcome::Pass : Outcome::Fail, detail};
}

// ---- criteria 5-7: Instacart --------------------------------------------

struct InstacartData {
    std::string orders, item_context, labels;
};

std::optional<InstacartData> find_instacart() {
    const char* env = std::getenv("CEMB_INSTACART_DIR");
    std::vector<std::string> roots;
    if (env && *env) roots.push_back(env);
    roots.push_back("data/instacart");
    for (const auto& root : roots) {
        InstacartData d;
        d.orders = (fs::path(root) / "orders.tsv").string();
        d.item_context = (fs::path(root) / "item_context.tsv").string();
        d.labels = (fs::path(root) / "labels_department.tsv").string();
        if (fs::exists(d.orders) && fs::exists(d.item_context) && fs::exists(d.labels))
            return d;
    }
    return std::nullopt;
}

const char* kInstacartSkip =
    "Instacart dataset not found; set CEMB_INSTACART_DIR to a directory with "
    "orders.tsv, item_context.tsv, labels_department.tsv "
    "(convert the Kaggle CSVs with scripts/instacart_to_tsv.py)";

struct InstacartRun {
    Vocabulary vocab;
    SplitResult splits;
    ObservationSet observations;
    EmbeddingStore store;
    double train_seconds = 0.0;
};

InstacartRun run_instacart(const InstacartData& data, const TrainConfig& cfg,
                           const std::set<std::string>* exclude = nullptr) {
    InstacartRun r;
    auto ing = ingest(data.orders, data.item_context, std::nullopt, 10, exclude);
    r.vocab = std::move(ing.vocab);
    SplitSpec spec;
    spec.k = 2;
    r.splits = split(ing.events, spec);
    r.observations = build_observations(r.splits.train, spec, r.vocab);
    auto result = train(r.observations, r.vocab, cfg, [](const EpochStats& s) {
        std::printf("  instacart epoch %u loss %.4f (%.0fs)\n", s.epoch + 1,
                    s.mean_loss.total, s.seconds);
        std::fflush(stdout);
    });
    r.store = std::move(result.store);
    r.train_seconds = result.total_seconds;
    return r;
}

TrainConfig instacart_config() {
    TrainConfig cfg;
    cfg.dim = 32;
    cfg.epochs = 30;
    cfg.seed = 1;
    cfg.threads = static_cast<int>(
        std::clamp(std::thread::hardware_concurrency(), 1u, 16u));
    return cfg;
}

std::vector<Index> load_labels(const std::string& path, const Vocabulary& vocab,
                               Index& n_classes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open labels: " + path);
    Interner classes;
    std::vector<Index> labels(vocab.n_items(), kInvalidIndex);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        Index item = vocab.items.lookup(trim(std::string_view(line).substr(0, tab)));
        if (item == kInvalidIndex) continue;
        labels[item] = classes.intern(std::string(trim(std::string_view(line).substr(tab + 1))));
    }
    for (auto& l : labels)
        if (l == kInvalidIndex) l = classes.intern("<unlabeled>");
    n_classes = classes.size();
    return labels;
}

Outcome criterion_instacart_reproduction() {
    auto data = find_instacart();
    if (!data) return {Outcome::Skip, kInstacartSkip};
    TrainConfig cfg = instacart_config();
    auto run = run_instacart(*data, cfg);
    if (run.train_seconds > 3600.0)
        return {Outcome::Fail, fmt("training took %.0fs (> 3600s budget)",
                                   run.train_seconds)};

    auto baskets = baskets_from_events(run.splits.test);
    EvalTask sampled;
    sampled.negatives_per_positive = 100;
    sampled.threads = cfg.threads;
    const double auc = within_basket_eval(baskets, run.store, sampled).get("auc");
    // NDCG in the full-catalog regime (the published value is only
    // consistent with ranking against all items); 20k sampled holdouts
    // estimate the mean to well under the +-0.03 tolerance.
    EvalTask full;
    full.negatives_per_positive = 0;
    full.max_queries = 20000;
    full.threads = cfg.threads;
    const double ndcg = within_basket_eval(baskets, run.store, full).get("ndcg");

    Index n_classes = 0;
    auto labels = load_labels(data->labels, run.vocab, n_classes);
    ProbeConfig probe;
    probe.threads = cfg.threads;
    auto rep = classification_probe(run.store, labels, n_classes, probe);
    const double micro = rep.get("micro_f1"), macro = rep.get("macro_f1");

    const bool ok = auc >= 0.95 && std::abs(ndcg - 0.151) <= 0.03 && micro >= 0.60 &&
                    macro >= 0.49;
    return {ok ? Outcome::Pass : Outcome::Fail,
            fmt("auc=%.3f (>=0.95), ndcg=%.3f (0.151 +- 0.03), micro=%.3f (>=0.60), "
                "macro=%.3f (>=0.49), train %.0fs",
                auc, ndcg, micro, macro, run.train_seconds)};
}

Outcome criterion_instacart_coldstart() {
    auto data = find_instacart();
    if (!data) return {Outcome::Skip, kInstacartSkip};
    TrainConfig cfg = instacart_config();

    auto full_ing = ingest(data->orders, data->item_context, std::nullopt, 10);
    std::vector<Index> order(full_ing.vocab.n_items());
    for (Index i = 0; i < full_ing.vocab.n_items(); ++i) order[i] = i;
    Rng rng(99);
    rng.shuffle(order);
    std::set<std::string> cold_names;
    const std::size_t n_cold = full_ing.vocab.n_items() / 20;  // 5%
    for (std::size_t i = 0; i < n_cold; ++i)
        cold_names.insert(full_ing.vocab.items.name(order[i]));

    auto run = run_instacart(*data, cfg, &cold_names);
    const Index m_red = run.vocab.n_items();
    SamplerBundle tables = SamplerBundle::build(run.observations, cfg);

    auto item_ctx = detail::read_context_file(data->item_context);
    std::vector<std::string> cold_list(cold_names.begin(), cold_names.end());
    std::map<std::string, Index> cold_row;
    std::vector<std::vector<Index>> cold_tokens;
    std::vector<std::string> kept;
    for (const auto& name : cold_list) {
        auto it = item_ctx.find(name);
        if (it == item_ctx.end()) continue;
        auto [ids, dropped] = resolve_cold_tokens(it->second, run.vocab);
        if (ids.empty()) continue;
        cold_row[name] = m_red + static_cast<Index>(kept.size());
        cold_tokens.push_back(ids);
        kept.push_back(name);
    }

    SplitSpec spec;
    spec.k = 2;
    auto full_splits = split(full_ing.events, spec);
    std::vector<std::vector<Index>> mapped;
    for (const auto& basket : baskets_from_events(full_splits.test)) {
        std::vector<Index> mb;
        bool has_cold = false, ok = true;
        for (Index it : basket) {
            const std::string& name = full_ing.vocab.items.name(it);
            if (auto c = cold_row.find(name); c != cold_row.end()) {
                mb.push_back(c->second);
                has_cold = true;
            } else {
                Index r2 = run.vocab.items.lookup(name);
                if (r2 == kInvalidIndex) {
                    ok = false;
                    break;
                }
                mb.push_back(r2);
            }
        }
        if (ok && has_cold && mb.size() >= 2) mapped.push_back(std::move(mb));
    }
    if (mapped.empty()) return {Outcome::Fail, "no test baskets contain cold items"};

    auto inferred_store = augment_with_inferred(run.store, tables.tokens, cold_tokens);
    auto jaccard_store = augment_with_jaccard(run.store, run.vocab, cold_tokens);
    EvalTask task;
    task.max_candidate = m_red;
    task.threads = cfg.threads;
    const double auc_inf = within_basket_eval(mapped, inferred_store, task).get("auc");
    const double auc_jac = within_basket_eval(mapped, jaccard_store, task).get("auc");
    const bool ok = auc_inf - auc_jac >= 0.02;
    return {ok ? Outcome::Pass : Outcome::Fail,
            fmt("inferred auc=%.3f vs jaccard auc=%.3f on %zu cold baskets (need +0.02)",
                auc_inf, auc_jac, mapped.size())};
}

Outcome criterion_instacart_ablations() {
    auto data = find_instacart();
    if (!data) return {Outcome::Skip, kInstacartSkip};
    TrainConfig cfg = instacart_config();

    auto probe_micro = [&](const InstacartRun& run) {
        Index n_classes = 0;
        auto labels = load_labels(data->labels, run.vocab, n_classes);
        ProbeConfig probe;
        probe.threads = cfg.threads;
        return classification_probe(run.store, labels, n_classes, probe).get("micro_f1");
    };

    auto full = run_instacart(*data, cfg);
    const double micro_full = probe_micro(full);
    TrainConfig no_user = cfg;
    no_user.use_user_bias = false;
    const double micro_no_user = probe_micro(run_instacart(*data, no_user));
    TrainConfig no_ctx = cfg;
    no_ctx.use_item_context = false;
    const double micro_no_ctx = probe_micro(run_instacart(*data, no_ctx));

    const bool ok = micro_full >= micro_no_user && micro_full >= micro_no_ctx;
    return {ok ? Outcome::Pass : Outcome::Fail,
            fmt("micro-F1 full=%.3f, no-user=%.3f, no-context=%.3f (full must be >= both)",
                micro_full, micro_no_user, micro_no_ctx)};
}

// ---- criterion 8 ---------------------------------------------------------

Outcome criterion_parallel_parity() {
    // Sized so the AUC does not saturate: weak planting, heavy noise, a
    // short budget. A genuine 1-vs-8-thread divergence has to show up.
    SynthSpec sp;
    sp.n_items = 300;
    sp.n_users = 1200;
    sp.n_pairs = 30;
    sp.n_combos = 10;
    sp.n_mutual = 30;
    sp.strength = 0.5;
    sp.noise_rate = 0.9;
    sp.min_episodes = 4;
    sp.max_episodes = 7;
    sp.items_per_category = 10;
    sp.seed = 515;

    TrainConfig one;
    one.dim = 16;
    one.epochs = 4;
    one.seed = 3;
    one.threads = 1;
    TrainConfig eight = one;
    eight.threads = 8;

    auto t1 = train_synth(sp, one, "crit8a");
    auto t8 = train_synth(sp, eight, "crit8b");

    EvalTask task;
    task.negatives_per_positive = 100;
    task.threads = 2;
    const double auc1 =
        within_basket_eval(baskets_from_events(t1.splits.test), t1.store, task).get("auc");
    const double auc8 =
        within_basket_eval(baskets_from_events(t8.splits.test), t8.store, task).get("auc");
    const double diff = std::abs(auc1 - auc8);
    const double ratio = t8.train_seconds / t1.train_seconds;

    const unsigned hw = std::thread::hardware_concurrency();
    const bool parity_ok = diff < 0.01;
    if (hw >= 8) {
        const bool ok = parity_ok && ratio <= 0.35;
        return {ok ? Outcome::Pass : Outcome::Fail,
                fmt("auc 1t=%.4f vs 8t=%.4f (diff %.4f < 0.01), wall ratio %.2f (<= 0.35)",
                    auc1, auc8, diff, ratio)};
    }
    // The 0.35x wall-clock bound presumes >= 8 hardware threads; this host
    // has fewer, so only the parity half is asserted and the ratio is
    // reported for the record.
    return {parity_ok ? Outcome::Pass : Outcome::Fail,
            fmt("auc 1t=%.4f vs 8t=%.4f (diff %.4f < 0.01); wall ratio %.2f reported only "
                "(host has %u hardware threads < 8, speedup bound not assertable)",
                auc1, auc8, diff, ratio, hw)};
}

// ---- criterion 9 ---------------------------------------------------------

Outcome criterion_determinism() {
    SynthSpec sp;
    sp.n_items = 80;
    sp.n_users = 120;
    sp.n_pairs = 8;
    sp.n_combos = 4;
    sp.n_mutual = 8;
    sp.min_episodes = 5;
    sp.max_episodes = 10;
    sp.items_per_category = 8;
    sp.seed = 616;

    TrainConfig cfg;
    cfg.dim = 12;
    cfg.epochs = 3;
    cfg.seed = 99;
    cfg.threads = 1;

    auto a = train_synth(sp, cfg, "crit9a");
    auto b = train_synth(sp, cfg, "crit9b");

    TempDir dir("crit9");
    a.store.save(dir.file("a.cemb"), "run");
    b.store.save(dir.file("b.cemb"), "run");
    auto bytes = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const bool snapshots_equal = bytes(dir.file("a.cemb")) == bytes(dir.file("b.cemb"));

    auto loaded = EmbeddingStore::load(dir.file("a.cemb"));
    const bool roundtrip = loaded.store.item_in.data == a.store.item_in.data &&
                           loaded.store.item_out.data == a.store.item_out.data &&
                           loaded.store.user.data == a.store.user.data &&
                           loaded.store.word.data == a.store.word.data &&
                           loaded.store.user_feat.data == a.store.user_feat.data;

    const bool ok = snapshots_equal && roundtrip;
    return {ok ? Outcome::Pass : Outcome::Fail,
            fmt("identical-seed snapshots byte-equal: %s; save/load bit-exact: %s",
                snapshots_equal ? "yes" : "NO", roundtrip ? "yes" : "NO")};
}

}  // namespace

int main() {
    std::printf("cemb acceptance suite\n");
    report(1, "gradient oracle (finite differences, all tables)", criterion_gradients());
    report(2, "item-out gradient equals fixed-intercept logistic regression",
           criterion_logreg_equivalence());
    report(3, "sampler fidelity (chi-square + floor boundary)", criterion_sampler());
    report(4, "synthetic planted-structure recovery", criterion_synthetic_recovery());
    report(5, "Instacart reproduction (AUC/NDCG/probe)", criterion_instacart_reproduction());
    report(6, "Instacart cold-start beats Jaccard baseline", criterion_instacart_coldstart());
    report(7, "Instacart ablation ordering on micro-F1", criterion_instacart_ablations());
    report(8, "parallel parity (1 vs 8 threads)", criterion_parallel_parity());
    report(9, "determinism and snapshot round-trip", criterion_determinism());
    if (g_failures) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all asserted criteria passed\n");
    return 0;
}
