#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cemb/config.hpp"
#include "cemb/evaluator.hpp"
#include "cemb/corpus.hpp"
#include "cemb/embedding_store.hpp"
#include "cemb/ranker.hpp"
#include "testutil.hpp"

#ifndef CEMB_CLI_PATH
#error "CEMB_CLI_PATH must point at the built cemb binary"
#endif

using namespace cemb;
using testutil::TempDir;

namespace {

struct RunOutput {
    int exit_code;
    std::string stdout_text;
};

RunOutput run_cli(const std::string& args, const TempDir& dir, const std::string& tag) {
    const std::string out_file = dir.file("cli_out_" + tag + ".txt");
    const std::string cmd =
        std::string(CEMB_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
    const int rc = std::system(cmd.c_str());
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WEXITSTATUS(rc), ss.str()};
}

std::string file_text(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// A ready-to-train tiny workspace: synthetic corpus + config file.
std::string make_config(const TempDir& dir, const std::string& extra = "") {
    const std::string cfg_path = dir.file("run.cfg");
    std::ofstream cfg(cfg_path);
    cfg << "orders = " << dir.file("orders.tsv") << "\n"
        << "item_context = " << dir.file("item_context.tsv") << "\n"
        << "min_transactions = 1\n"
        << "dim = 8\nepochs = 2\nthreads = 1\nseed = 9\nk = 2\n"
        << extra;
    cfg.close();
    return cfg_path;
}

void make_synth(const TempDir& dir) {
    auto r = run_cli("synth --out " + dir.str() +
                         " --items 60 --users 50 --pairs 5 --combos 2 --mutual 5"
                         " --min-episodes 4 --max-episodes 8 --cat-size 10 --seed 3",
                     dir, "synth");
    REQUIRE(r.exit_code == 0);
}

}  // namespace

TEST_CASE("help lists the documented subcommands and flags", "[cli]") {
    TempDir dir("cli_help");
    auto r = run_cli("--help", dir, "help");
    CHECK(r.exit_code == 0);
    for (const char* word :
         {"prepare", "train", "evaluate", "recommend", "infer-cold", "synth"})
        CHECK(r.stdout_text.find(word) != std::string::npos);
    auto r2 = run_cli("recommend --help", dir, "help2");
    for (const char* flag : {"--context", "--user", "--k", "--pool", "--mode"})
        CHECK(r2.stdout_text.find(flag) != std::string::npos);
}

TEST_CASE("missing orders file exits 2 and names the path", "[cli]") {
    TempDir dir("cli_missing");
    make_synth(dir);
    const std::string cfg = make_config(dir);
    auto r = run_cli("prepare --config " + cfg + " --out " + dir.str() +
                         " --set orders=/nonexistent/orders.tsv",
                     dir, "missing");
    CHECK(r.exit_code == 2);
    CHECK(r.stdout_text.find("/nonexistent/orders.tsv") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected", "[cli]") {
    TempDir dir("cli_unknown");
    make_synth(dir);
    std::ofstream(dir.file("bad.cfg")) << "orders = x\nnot_a_key = 1\n";
    auto r = run_cli("prepare --config " + dir.file("bad.cfg") + " --out " + dir.str(),
                     dir, "unknown");
    CHECK(r.exit_code == 2);
    CHECK(r.stdout_text.find("not_a_key") != std::string::npos);
    auto r2 = run_cli("prepare --config " + make_config(dir) + " --out " + dir.str() +
                          " --set also_bad=2",
                      dir, "unknown2");
    CHECK(r2.exit_code == 2);
}

TEST_CASE("prepare is deterministic and manifest matches hand counts", "[cli]") {
    TempDir dir("cli_prepare");
    make_synth(dir);
    const std::string cfg = make_config(dir);
    auto r1 = run_cli("prepare --config " + cfg + " --out " + dir.str(), dir, "p1");
    REQUIRE(r1.exit_code == 0);
    const std::string manifest1 = file_text(dir.file("vocab.manifest"));
    auto r2 = run_cli("prepare --config " + cfg + " --out " + dir.str(), dir, "p2");
    REQUIRE(r2.exit_code == 0);
    CHECK(manifest1 == file_text(dir.file("vocab.manifest")));

    // hand-count M, N from the orders file
    std::ifstream orders(dir.file("orders.tsv"));
    std::set<std::string> users, items;
    std::string line;
    while (std::getline(orders, line)) {
        auto cols = split_on(line, '\t');
        REQUIRE(cols.size() == 4);
        users.insert(cols[0]);
        items.insert(cols[3]);
    }
    auto kv = read_kv_file(dir.file("vocab.manifest"));
    CHECK(kv.at("M") == std::to_string(items.size()));
    CHECK(kv.at("N") == std::to_string(users.size()));
    CHECK(file_text(dir.file("config.effective")).find("dim = 8") != std::string::npos);
}

TEST_CASE("full pipeline: prepare, train, evaluate, recommend", "[cli]") {
    TempDir dir("cli_pipeline");
    make_synth(dir);
    const std::string cfg = make_config(dir, "eval_negatives = 20\n");
    REQUIRE(run_cli("prepare --config " + cfg + " --out " + dir.str(), dir, "prep")
                .exit_code == 0);
    auto tr = run_cli("train --config " + cfg + " --out " + dir.str(), dir, "train");
    REQUIRE(tr.exit_code == 0);
    CHECK(tr.stdout_text.find("epoch 1/2") != std::string::npos);
    CHECK(tr.stdout_text.find("epoch 2/2") != std::string::npos);
    CHECK(std::filesystem::exists(dir.file("model.cemb")));
    CHECK(std::filesystem::exists(dir.file("run.manifest")));
    auto manifest = read_kv_file(dir.file("run.manifest"));
    CHECK(manifest.count("epoch_1_loss") == 1);
    CHECK(manifest.count("wall_clock_seconds") == 1);

    auto ev = run_cli("evaluate --config " + cfg + " --out " + dir.str() +
                          " --task within_basket",
                      dir, "eval");
    REQUIRE(ev.exit_code == 0);
    CHECK(std::filesystem::exists(dir.file("eval.tsv")));
    CHECK(file_text(dir.file("eval.tsv")).find("auc") != std::string::npos);

    // the command reproduces the in-process evaluator's numbers
    {
        PreparedCorpus pc = PreparedCorpus::load(dir.file("corpus.bin"));
        auto loaded = EmbeddingStore::load(dir.file("model.cemb"));
        EvalTask task;
        task.negatives_per_positive = 20;  // matches eval_negatives in the config
        auto rep = within_basket_eval(baskets_from_events(pc.splits.test), loaded.store,
                                      task);
        auto kv = read_kv_file(dir.file("eval.kv"));
        CHECK(std::stod(kv.at("auc")) == Catch::Approx(rep.get("auc")).margin(1e-6));
        CHECK(std::stod(kv.at("ndcg")) == Catch::Approx(rep.get("ndcg")).margin(1e-6));
    }

    auto probe = run_cli("evaluate --config " + cfg + " --out " + dir.str() +
                             " --task classification --labels " + dir.file("labels.tsv"),
                         dir, "probe");
    REQUIRE(probe.exit_code == 0);
    CHECK(probe.stdout_text.find("micro_f1") != std::string::npos);

    auto rec = run_cli("recommend --config " + cfg + " --out " + dir.str() +
                           " --context p0 --k 5 --mode complement",
                       dir, "rec");
    REQUIRE(rec.exit_code == 0);

    // delegation: CLI output matches the library ranking byte for byte
    PreparedCorpus pc = PreparedCorpus::load(dir.file("corpus.bin"));
    auto loaded = EmbeddingStore::load(dir.file("model.cemb"));
    Query q;
    q.context_items = {pc.vocab.items.lookup("p0")};
    q.k = 5;
    auto ranked = rank_by_complement(q, loaded.store);
    std::string expect;
    char buf[128];
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu\t%s\t%.6f\n", i + 1,
                      pc.vocab.items.name(ranked[i].item).c_str(), ranked[i].score);
        expect += buf;
    }
    CHECK(rec.stdout_text == expect);
}

TEST_CASE("train is seed-deterministic and ablations change the hash", "[cli]") {
    TempDir dir("cli_det");
    make_synth(dir);
    const std::string cfg = make_config(dir);
    REQUIRE(run_cli("prepare --config " + cfg + " --out " + dir.str(), dir, "p")
                .exit_code == 0);
    REQUIRE(run_cli("train --config " + cfg + " --out " + dir.str(), dir, "t1")
                .exit_code == 0);
    const std::string m1 = file_text(dir.file("model.cemb"));
    REQUIRE(run_cli("train --config " + cfg + " --out " + dir.str(), dir, "t2")
                .exit_code == 0);
    CHECK(m1 == file_text(dir.file("model.cemb")));

    REQUIRE(run_cli("train --config " + cfg + " --out " + dir.str() +
                        " --set use_user_bias=false",
                    dir, "t3")
                .exit_code == 0);
    CHECK(m1 != file_text(dir.file("model.cemb")));
}

TEST_CASE("trained loss beats the zero-embedding baseline", "[cli]") {
    TempDir dir("cli_loss");
    make_synth(dir);
    const std::string cfg = make_config(dir, "epochs = 4\n");
    REQUIRE(run_cli("prepare --config " + cfg + " --out " + dir.str(), dir, "p")
                .exit_code == 0);
    REQUIRE(run_cli("train --config " + cfg + " --out " + dir.str(), dir, "t")
                .exit_code == 0);
    auto manifest = read_kv_file(dir.file("run.manifest"));
    const double last = std::stod(manifest.at("epoch_4_loss"));
    // zero embeddings: every active positive term costs (1+5) ln 2; count
    // the mean number of terms from the prepared observations
    PreparedCorpus pc = PreparedCorpus::load(dir.file("corpus.bin"));
    double terms = 0.0;
    for (std::size_t i = 0; i < pc.observations.size(); ++i) {
        auto o = pc.observations.get(i);
        terms += 1.0 + pc.vocab.tokens_of_item.tokens(o.target).size();
        for (Index c : o.ctx) terms += pc.vocab.tokens_of_item.tokens(c).size();
        terms += pc.vocab.tokens_of_user.tokens(o.user).size();
    }
    terms /= static_cast<double>(pc.observations.size());
    const double zero_baseline = terms * 6.0 * std::log(2.0);
    CHECK(last < zero_baseline);
}

TEST_CASE("infer-cold writes a loadable item-in fragment", "[cli]") {
    TempDir dir("cli_cold");
    make_synth(dir);
    const std::string cfg = make_config(dir);
    REQUIRE(run_cli("prepare --config " + cfg + " --out " + dir.str(), dir, "p")
                .exit_code == 0);
    REQUIRE(run_cli("train --config " + cfg + " --out " + dir.str(), dir, "t")
                .exit_code == 0);
    // two cold items: one shares category tokens, one is fully novel
    std::ofstream(dir.file("cold.tsv")) << "new1\tc0 i3\nnew2\tbrand_new_token\n";
    auto r = run_cli("infer-cold --config " + cfg + " --out " + dir.str() + " --items " +
                         dir.file("cold.tsv") + " --steps 20",
                     dir, "cold");
    REQUIRE(r.exit_code == 0);
    auto frag = EmbeddingStore::load(dir.file("cold.cemb"));
    CHECK(frag.store.item_in.rows == 1);  // new2 skipped, warned
    CHECK(frag.store.item_in.cols == 8);
    CHECK(file_text(dir.file("cold.ids.tsv")) == "0\tnew1\n");
    CHECK(r.stdout_text.find("warning") != std::string::npos);
}

TEST_CASE("usage errors in recommend exit 2", "[cli]") {
    TempDir dir("cli_rec_err");
    make_synth(dir);
    const std::string cfg = make_config(dir);
    REQUIRE(run_cli("prepare --config " + cfg + " --out " + dir.str(), dir, "p")
                .exit_code == 0);
    REQUIRE(run_cli("train --config " + cfg + " --out " + dir.str(), dir, "t")
                .exit_code == 0);
    CHECK(run_cli("recommend --config " + cfg + " --out " + dir.str() +
                      " --context not_an_item",
                  dir, "r1")
              .exit_code == 2);
    CHECK(run_cli("recommend --config " + cfg + " --out " + dir.str() +
                      " --context p0 --mode user",
                  dir, "r2")
              .exit_code == 2);  // user mode without --user
    CHECK(run_cli("recommend --config " + cfg + " --out " + dir.str(), dir, "r3")
              .exit_code == 2);  // --context required
}
