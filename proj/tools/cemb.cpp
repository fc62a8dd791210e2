// cemb: complementary-product embedding toolkit.
//
// Pipeline subcommands compose through an artifact directory (--out):
//   synth      -> orders.tsv, item_context.tsv, labels.tsv, ground_truth.tsv
//   prepare    -> corpus.bin, vocab.manifest, config.effective
//   train      -> model.cemb, run.manifest
//   evaluate   -> eval.kv, eval.tsv
//   recommend  -> ranked TSV on stdout
//   infer-cold -> cold.cemb (+ row -> item id sidecar)
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cemb/coldstart.hpp"
#include "cemb/config.hpp"
#include "cemb/corpus.hpp"
#include "cemb/evaluator.hpp"
#include "cemb/ranker.hpp"
#include "cemb/synth.hpp"
#include "cemb/trainer.hpp"

namespace fs = std::filesystem;
using namespace cemb;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw UsageError(what + " path is required");
    if (!fs::exists(path)) throw UsageError(what + " not found: " + path);
}

RunConfig load_config(const std::string& config_path,
                      const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!config_path.empty()) {
        require_file(config_path, "config file");
        try {
            cfg = RunConfig::from_file(config_path);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    for (const auto& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw UsageError("--set expects key=value, got '" + kv + "'");
        try {
            cfg.apply(std::string(trim(kv.substr(0, eq))),
                      std::string(trim(kv.substr(eq + 1))));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

fs::path artifact(const std::string& out_dir, const char* name) {
    return fs::path(out_dir) / name;
}

// Deterministic cold-item pick: seeded shuffle of the post-filter vocab.
std::set<std::string> pick_cold_items(const Vocabulary& vocab, double fraction,
                                      std::uint64_t seed) {
    std::vector<Index> order(vocab.n_items());
    for (Index i = 0; i < vocab.n_items(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t n_cold =
        static_cast<std::size_t>(fraction * static_cast<double>(vocab.n_items()));
    std::set<std::string> cold;
    for (std::size_t i = 0; i < n_cold; ++i) cold.insert(vocab.items.name(order[i]));
    return cold;
}

int cmd_prepare(const RunConfig& cfg, const std::string& out_dir) {
    require_file(cfg.orders, "orders file");
    require_file(cfg.item_context, "item context file");
    std::optional<std::string> user_ctx;
    if (!cfg.user_context.empty()) {
        require_file(cfg.user_context, "user context file");
        user_ctx = cfg.user_context;
    }
    fs::create_directories(out_dir);

    std::set<std::string> cold;
    if (cfg.holdout_fraction > 0.0) {
        auto full = ingest(cfg.orders, cfg.item_context, user_ctx, cfg.min_transactions);
        cold = pick_cold_items(full.vocab, cfg.holdout_fraction, cfg.holdout_seed);
        // Cold items keep their context lines so infer-cold can embed them.
        auto ctx = detail::read_context_file(cfg.item_context);
        std::ofstream out(artifact(out_dir, "cold_items.tsv"));
        for (const auto& name : cold) {
            out << name;
            out << '\t';
            auto it = ctx.find(name);
            if (it != ctx.end()) {
                for (std::size_t i = 0; i < it->second.size(); ++i)
                    out << (i ? " " : "") << it->second[i];
            }
            out << '\n';
        }
    }

    PreparedCorpus pc;
    auto ing = ingest(cfg.orders, cfg.item_context, user_ctx, cfg.min_transactions,
                      cold.empty() ? nullptr : &cold);
    pc.vocab = std::move(ing.vocab);
    pc.spec = cfg.split_spec();
    pc.splits = split(ing.events, pc.spec);
    pc.observations = build_observations(pc.splits.train, pc.spec, pc.vocab);
    pc.save(artifact(out_dir, "corpus.bin").string());

    char hash_buf[32];
    std::snprintf(hash_buf, sizeof hash_buf, "%016llx",
                  static_cast<unsigned long long>(cfg.hash()));
    write_kv_file(artifact(out_dir, "vocab.manifest").string(),
                  {{"M", std::to_string(pc.vocab.n_items())},
                   {"N", std::to_string(pc.vocab.n_users())},
                   {"n_w", std::to_string(pc.vocab.n_item_tokens())},
                   {"n_x", std::to_string(pc.vocab.n_user_tokens())},
                   {"train_events", std::to_string(pc.splits.train.size())},
                   {"valid_events", std::to_string(pc.splits.valid.size())},
                   {"test_events", std::to_string(pc.splits.test.size())},
                   {"observations", std::to_string(pc.observations.size())},
                   {"cold_items", std::to_string(cold.size())},
                   {"config_hash", hash_buf}});
    cfg.write(artifact(out_dir, "config.effective").string());
    std::cout << "prepared " << pc.observations.size() << " observations (M="
              << pc.vocab.n_items() << ", N=" << pc.vocab.n_users() << ")\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& out_dir) {
    const auto corpus_path = artifact(out_dir, "corpus.bin");
    require_file(corpus_path.string(), "prepared corpus (run `cemb prepare` first)");
    PreparedCorpus pc = PreparedCorpus::load(corpus_path.string());

    TrainConfig tc = cfg.train_config();
    TrainResult result = train(pc.observations, pc.vocab, tc, [&](const EpochStats& s) {
        std::printf("epoch %u/%u  loss %.6f  (seq %.6f  item_ctx %.6f  user_ctx %.6f)  %.1fs\n",
                    s.epoch + 1, tc.epochs, s.mean_loss.total, s.mean_loss.seq_term,
                    s.mean_loss.item_context_term, s.mean_loss.user_context_term, s.seconds);
        std::fflush(stdout);
    });

    result.store.save(artifact(out_dir, "model.cemb").string(), cfg.canonical_string());

    std::vector<std::pair<std::string, std::string>> manifest = cfg.to_kv();
    const ObservationSet& obs = pc.observations;
    manifest.emplace_back("sampler_item_support", std::to_string(obs.item_counts().size()));
    manifest.emplace_back("sampler_item_total", std::to_string(obs.total_item_count()));
    manifest.emplace_back("sampler_token_support", std::to_string(obs.token_counts().size()));
    manifest.emplace_back("sampler_token_total", std::to_string(obs.total_token_count()));
    manifest.emplace_back("sampler_ufeat_support", std::to_string(obs.ufeat_counts().size()));
    manifest.emplace_back("sampler_ufeat_total", std::to_string(obs.total_ufeat_count()));
    char buf[64];
    for (const auto& s : result.epochs) {
        std::snprintf(buf, sizeof buf, "%.6f", s.mean_loss.total);
        manifest.emplace_back("epoch_" + std::to_string(s.epoch + 1) + "_loss", buf);
    }
    std::snprintf(buf, sizeof buf, "%.3f", result.total_seconds);
    manifest.emplace_back("wall_clock_seconds", buf);
    write_kv_file(artifact(out_dir, "run.manifest").string(), manifest);
    std::cout << "trained " << cfg.epochs << " epochs in " << result.total_seconds
              << "s; snapshot at " << artifact(out_dir, "model.cemb").string() << "\n";
    return 0;
}

EmbeddingStore load_snapshot(const std::string& out_dir) {
    const auto path = artifact(out_dir, "model.cemb");
    require_file(path.string(), "model snapshot (run `cemb train` first)");
    return EmbeddingStore::load(path.string()).store;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& out_dir, const std::string& task,
                 const std::string& labels_path, bool with_user) {
    const auto corpus_path = artifact(out_dir, "corpus.bin");
    require_file(corpus_path.string(), "prepared corpus (run `cemb prepare` first)");
    PreparedCorpus pc = PreparedCorpus::load(corpus_path.string());
    EmbeddingStore store = load_snapshot(out_dir);

    EvalTask et;
    et.k_values = cfg.eval_k_values();
    et.negatives_per_positive = cfg.eval_negatives;
    et.seed = cfg.eval_seed;
    et.threads = cfg.threads;
    et.d2 = cfg.d2;
    et.with_user = with_user;
    et.max_queries = cfg.eval_max_queries;

    EvalReport rep;
    if (task == "within_basket") {
        rep = within_basket_eval(baskets_from_events(pc.splits.test), store, et);
    } else if (task == "next_purchase") {
        try {
            rep = next_purchase_eval(pc.splits, pc.spec, store, et);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    } else if (task == "classification") {
        require_file(labels_path, "labels file (--labels)");
        std::ifstream in(labels_path);
        std::string line;
        std::vector<Index> labels(store.n_items(), kInvalidIndex);
        Interner classes;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw UsageError(labels_path + ":" + std::to_string(lineno) +
                                 ": expected item_id<TAB>label");
            Index item = pc.vocab.items.lookup(trim(line.substr(0, tab)));
            if (item == kInvalidIndex) continue;  // filtered or cold item
            labels[item] = classes.intern(std::string(trim(line.substr(tab + 1))));
        }
        for (Index i = 0; i < store.n_items(); ++i)
            if (labels[i] == kInvalidIndex)
                throw std::runtime_error("no label for item " + pc.vocab.items.name(i));
        ProbeConfig probe;
        probe.seed = cfg.eval_seed;
        probe.threads = cfg.threads;
        rep = classification_probe(store, labels, classes.size(), probe);
    } else {
        throw UsageError("unknown --task '" + task +
                         "' (within_basket | next_purchase | classification)");
    }

    rep.write_kv(artifact(out_dir, "eval.kv").string());
    std::ofstream tsv(artifact(out_dir, "eval.tsv"));
    tsv << rep.tsv_header() << '\n' << rep.tsv_line() << '\n';
    std::cout << rep.tsv_header() << '\n' << rep.tsv_line() << '\n';
    return 0;
}

int cmd_recommend(const RunConfig&, const std::string& out_dir, const std::string& context_csv,
                  const std::string& user_id, Index k, Index pool, const std::string& mode,
                  const std::string& allowlist_path) {
    const auto corpus_path = artifact(out_dir, "corpus.bin");
    require_file(corpus_path.string(), "prepared corpus");
    PreparedCorpus pc = PreparedCorpus::load(corpus_path.string());
    EmbeddingStore store = load_snapshot(out_dir);

    Query q;
    q.k = k;
    q.recall_pool = pool;
    for (const auto& piece : split_on(context_csv, ',')) {
        auto name = trim(piece);
        if (name.empty()) continue;
        Index item = pc.vocab.items.lookup(name);
        if (item == kInvalidIndex)
            throw UsageError("context item not in vocabulary: " + std::string(name));
        q.context_items.push_back(item);
    }
    if (q.context_items.empty()) throw UsageError("--context must name at least one item");
    if (!user_id.empty()) {
        Index u = pc.vocab.users.lookup(user_id);
        if (u == kInvalidIndex) throw UsageError("user not in vocabulary: " + user_id);
        q.user = u;
    }
    if (!allowlist_path.empty()) {
        require_file(allowlist_path, "allowlist file");
        std::ifstream in(allowlist_path);
        std::string line;
        while (std::getline(in, line)) {
            auto name = trim(line);
            if (name.empty()) continue;
            Index item = pc.vocab.items.lookup(name);
            if (item != kInvalidIndex) q.candidates.push_back(item);
        }
    }

    RankedList ranked;
    try {
        if (mode == "complement") ranked = rank_by_complement(q, store);
        else if (mode == "user") ranked = rank_with_user(q, store);
        else if (mode == "two-stage") ranked = recall_rerank(q, store);
        else throw UsageError("unknown --mode '" + mode + "' (complement | user | two-stage)");
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    for (std::size_t r = 0; r < ranked.size(); ++r)
        std::printf("%zu\t%s\t%.6f\n", r + 1, pc.vocab.items.name(ranked[r].item).c_str(),
                    ranked[r].score);
    return 0;
}

int cmd_infer_cold(const RunConfig& cfg, const std::string& out_dir,
                   const std::string& items_path, int steps, double step_size,
                   double norm_cap) {
    require_file(items_path, "cold items file");
    const auto corpus_path = artifact(out_dir, "corpus.bin");
    require_file(corpus_path.string(), "prepared corpus");
    PreparedCorpus pc = PreparedCorpus::load(corpus_path.string());
    EmbeddingStore store = load_snapshot(out_dir);

    TrainConfig tc = cfg.train_config();
    SamplerBundle tables = SamplerBundle::build(pc.observations, tc);
    if (!tables.has_tokens)
        throw std::runtime_error("infer-cold requires a trained token table "
                                 "(corpus has no item context)");

    auto ctx = detail::read_context_file(items_path);
    std::vector<std::string> ids;
    ids.reserve(ctx.size());
    for (const auto& [id, tokens] : ctx) ids.push_back(id);
    std::sort(ids.begin(), ids.end());

    EmbeddingStoreT<float> fragment;
    fragment.dim = store.dim;
    fragment.user_dim = store.user_dim;
    fragment.item_in.resize(0, store.dim);
    std::vector<std::vector<float>> rows;
    std::vector<std::string> kept;
    Rng rng(cfg.seed ^ 0xc01dc01dull);
    std::size_t skipped = 0;
    for (const auto& id : ids) {
        auto [toks, dropped] = resolve_cold_tokens(ctx[id], pc.vocab);
        if (dropped)
            std::fprintf(stderr, "warning: %s: dropped %zu unknown token(s)\n", id.c_str(),
                         dropped);
        if (toks.empty()) {
            std::fprintf(stderr, "warning: %s: no in-vocabulary tokens, skipped\n", id.c_str());
            ++skipped;
            continue;
        }
        ColdStartRequest req;
        req.tokens = std::move(toks);
        req.steps = steps;
        req.step_size = step_size;
        req.norm_cap = norm_cap;
        req.negatives = cfg.negatives;
        rows.push_back(infer_cold_item(req, store, tables.tokens, rng));
        kept.push_back(id);
    }
    if (rows.empty()) throw std::runtime_error("no cold item could be embedded");

    fragment.item_in.resize(rows.size(), store.dim);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (Index d = 0; d < store.dim; ++d)
            fragment.item_in.row(static_cast<Index>(r))[d] = rows[r][d];
    fragment.save(artifact(out_dir, "cold.cemb").string(), "cold item_in fragment");
    std::ofstream sidecar(artifact(out_dir, "cold.ids.tsv"));
    for (std::size_t r = 0; r < kept.size(); ++r) sidecar << r << '\t' << kept[r] << '\n';
    std::cout << "inferred " << rows.size() << " cold item embeddings (" << skipped
              << " skipped)\n";
    return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_dir) {
    fs::create_directories(out_dir);
    SynthCorpus corpus = generate_synthetic(spec);
    corpus.write_orders(artifact(out_dir, "orders.tsv").string());
    corpus.write_item_context(artifact(out_dir, "item_context.tsv").string());
    corpus.write_labels(artifact(out_dir, "labels.tsv").string());
    corpus.write_ground_truth(artifact(out_dir, "ground_truth.tsv").string());
    std::cout << "wrote synthetic corpus (" << corpus.orders.size() << " orders) to "
              << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"complementary-product embedding toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::vector<std::string> overrides;
    int threads_flag = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value configuration file");
        sub->add_option("--out", out_dir, "artifact directory");
        sub->add_option("--set", overrides, "override a config key (key=value), repeatable");
        sub->add_option("--threads", threads_flag, "worker threads (overrides config)");
    };

    auto* prepare = app.add_subcommand("prepare", "ingest, filter, split, build observations");
    add_common(prepare);

    auto* train_cmd = app.add_subcommand("train", "train embeddings on a prepared corpus");
    add_common(train_cmd);

    auto* evaluate = app.add_subcommand("evaluate", "run an evaluation task");
    add_common(evaluate);
    std::string task = "within_basket", labels_path;
    bool with_user = false;
    evaluate->add_option("--task", task, "within_basket | next_purchase | classification");
    evaluate->add_option("--labels", labels_path, "item_id<TAB>label file (classification)");
    evaluate->add_flag("--with-user", with_user, "rank with the user term (next_purchase)");

    auto* recommend = app.add_subcommand("recommend", "rank complementary items for a context");
    add_common(recommend);
    std::string context_csv, user_id, mode = "complement", allowlist;
    Index top_k = 10, pool = 100;
    recommend->add_option("--context", context_csv, "comma-separated context item ids")
        ->required();
    recommend->add_option("--user", user_id, "user id (user / two-stage modes)");
    recommend->add_option("--k", top_k, "results to return");
    recommend->add_option("--pool", pool, "recall pool size (two-stage)");
    recommend->add_option("--mode", mode, "complement | user | two-stage");
    recommend->add_option("--allowlist", allowlist, "candidate item ids, one per line");

    auto* infer_cold = app.add_subcommand("infer-cold", "embed cold items from tokens");
    add_common(infer_cold);
    std::string cold_items_path;
    int cold_steps = 200;
    double cold_step_size = 0.05, cold_norm_cap = 0.0;
    infer_cold->add_option("--items", cold_items_path, "item context file of cold items")
        ->required();
    infer_cold->add_option("--steps", cold_steps, "ascent iterations");
    infer_cold->add_option("--step-size", cold_step_size, "initial ascent step size");
    infer_cold->add_option("--norm-cap", cold_norm_cap,
                           "embedding norm cap (0 = 95th percentile of trained norms)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic planted corpus");
    synth->add_option("--out", out_dir, "artifact directory");
    SynthSpec sp;
    synth->add_option("--items", sp.n_items, "catalog size");
    synth->add_option("--users", sp.n_users, "user count");
    synth->add_option("--pairs", sp.n_pairs, "planted directed pairs");
    synth->add_option("--combos", sp.n_combos, "planted higher-order combos");
    synth->add_option("--mutual", sp.n_mutual, "mutual (basket) pairs");
    synth->add_option("--strength", sp.strength, "episode follow probability");
    synth->add_option("--noise", sp.noise_rate, "extra filler-order rate");
    synth->add_option("--min-episodes", sp.min_episodes, "episodes per user, lower bound");
    synth->add_option("--max-episodes", sp.max_episodes, "episodes per user, upper bound");
    synth->add_option("--cat-size", sp.items_per_category, "items per category token");
    synth->add_option("--seed", sp.seed, "generator seed");
    bool seconds_time = false;
    synth->add_flag("--seconds", seconds_time, "emit epoch-second times (one order per day)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            sp.ordinal_time = !seconds_time;
            return cmd_synth(sp, out_dir);
        }
        RunConfig cfg = load_config(config_path, overrides);
        if (threads_flag > 0) cfg.threads = threads_flag;
        if (prepare->parsed()) return cmd_prepare(cfg, out_dir);
        if (train_cmd->parsed()) return cmd_train(cfg, out_dir);
        if (evaluate->parsed()) return cmd_evaluate(cfg, out_dir, task, labels_path, with_user);
        if (recommend->parsed())
            return cmd_recommend(cfg, out_dir, context_csv, user_id, top_k, pool, mode,
                                 allowlist);
        if (infer_cold->parsed())
            return cmd_infer_cold(cfg, out_dir, cold_items_path, cold_steps, cold_step_size,
                                  cold_norm_cap);
        std::fprintf(stderr, "error: no subcommand\n");
        return 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
