#pragma once

// Run configuration: flat `key = value` files with '#' comments, overridable
// from the command line. Unknown keys are rejected; every run writes back
// the effective configuration so it can be reproduced exactly.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cemb/common.hpp"
#include "cemb/corpus.hpp"
#include "cemb/io_util.hpp"
#include "cemb/trainer.hpp"

namespace cemb {

struct RunConfig {
    // corpus
    std::string orders;
    std::string item_context;
    std::string user_context;  // optional
    std::string time_kind = "ordinal";  // ordinal | seconds
    Count min_transactions = 10;

    // split / windows
    std::string split = "last-order";  // last-order | time-cutoff
    std::int64_t train_end = 0;
    std::int64_t valid_end = 0;
    std::string context = "window";  // window | days
    Index k = 2;
    Index d1 = 3;
    Index d2 = 7;

    // training
    Index dim = 32;
    Index user_dim = 0;
    std::string item_user_table = "tied";  // tied | separate
    Index epochs = 30;
    double alpha = 0.025;
    int negatives = 5;
    int threads = 1;
    std::uint64_t seed = 1;
    double neg_sample_floor = kDefaultNegSampleFloor;
    bool use_user_bias = true;
    bool use_item_context = true;
    bool use_user_context = true;

    // evaluation
    int eval_negatives = 100;
    std::uint64_t eval_seed = 12345;
    std::string eval_k = "5,10";
    std::uint64_t eval_max_queries = 0;  // 0 = evaluate every holdout

    // cold-start holdout (fraction of items removed before training)
    double holdout_fraction = 0.0;
    std::uint64_t holdout_seed = 99;

    SplitSpec split_spec() const {
        SplitSpec s;
        s.mode = split == "time-cutoff" ? SplitMode::TimeCutoff : SplitMode::LastOrder;
        s.context = context == "days" ? ContextKind::Days : ContextKind::Window;
        s.train_end = train_end;
        s.valid_end = valid_end;
        s.k = k;
        s.d1 = d1;
        s.d2 = d2;
        return s;
    }

    TrainConfig train_config() const {
        TrainConfig t;
        t.epochs = epochs;
        t.alpha0 = alpha;
        t.negatives = negatives;
        t.threads = threads;
        t.seed = seed;
        t.dim = dim;
        t.user_dim = user_dim;
        t.tied_item_user = item_user_table != "separate";
        t.use_user_bias = use_user_bias;
        t.use_item_context = use_item_context;
        t.use_user_context = use_user_context;
        t.neg_sample_floor = neg_sample_floor;
        return t;
    }

    std::vector<Index> eval_k_values() const {
        std::vector<Index> ks;
        for (const auto& piece : split_on(eval_k, ',')) {
            auto t = trim(piece);
            if (!t.empty()) ks.push_back(static_cast<Index>(std::stoul(std::string(t))));
        }
        if (ks.empty()) throw std::invalid_argument("config: eval_k has no values");
        return ks;
    }

    void validate() const {
        if (time_kind != "ordinal" && time_kind != "seconds")
            throw std::invalid_argument("config: time_kind must be ordinal or seconds");
        if (split != "last-order" && split != "time-cutoff")
            throw std::invalid_argument("config: split must be last-order or time-cutoff");
        if (context != "window" && context != "days")
            throw std::invalid_argument("config: context must be window or days");
        if (context == "days" && time_kind != "seconds")
            throw std::invalid_argument("config: day windows require time_kind = seconds");
        if (split == "time-cutoff" && time_kind != "seconds")
            throw std::invalid_argument("config: time-cutoff split requires time_kind = seconds");
        if (item_user_table != "tied" && item_user_table != "separate")
            throw std::invalid_argument("config: item_user_table must be tied or separate");
        if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
            throw std::invalid_argument("config: holdout_fraction must be in [0,1)");
        split_spec().validate();
        train_config().validate();
        eval_k_values();
    }

    // The canonical serialized form; also what gets hashed into snapshots.
    std::vector<std::pair<std::string, std::string>> to_kv() const {
        auto b = [](bool v) { return v ? "true" : "false"; };
        char fbuf[64];
        auto f = [&fbuf](double v) {
            std::snprintf(fbuf, sizeof fbuf, "%.17g", v);
            return std::string(fbuf);
        };
        return {
            {"orders", orders},
            {"item_context", item_context},
            {"user_context", user_context},
            {"time_kind", time_kind},
            {"min_transactions", std::to_string(min_transactions)},
            {"split", split},
            {"train_end", std::to_string(train_end)},
            {"valid_end", std::to_string(valid_end)},
            {"context", context},
            {"k", std::to_string(k)},
            {"d1", std::to_string(d1)},
            {"d2", std::to_string(d2)},
            {"dim", std::to_string(dim)},
            {"user_dim", std::to_string(user_dim)},
            {"item_user_table", item_user_table},
            {"epochs", std::to_string(epochs)},
            {"alpha", f(alpha)},
            {"negatives", std::to_string(negatives)},
            {"threads", std::to_string(threads)},
            {"seed", std::to_string(seed)},
            {"neg_sample_floor", f(neg_sample_floor)},
            {"use_user_bias", b(use_user_bias)},
            {"use_item_context", b(use_item_context)},
            {"use_user_context", b(use_user_context)},
            {"eval_negatives", std::to_string(eval_negatives)},
            {"eval_seed", std::to_string(eval_seed)},
            {"eval_k", eval_k},
            {"eval_max_queries", std::to_string(eval_max_queries)},
            {"holdout_fraction", f(holdout_fraction)},
            {"holdout_seed", std::to_string(holdout_seed)},
        };
    }

    std::string canonical_string() const {
        std::string s;
        for (const auto& [k2, v] : to_kv()) s += k2 + "=" + v + "\n";
        return s;
    }

    std::uint64_t hash() const { return fnv1a64(canonical_string()); }

    void write(const std::string& path) const { write_kv_file(path, to_kv()); }

    void apply(const std::string& key, const std::string& value) {
        auto as_bool = [&](const std::string& v) {
            if (v == "true" || v == "1") return true;
            if (v == "false" || v == "0") return false;
            throw std::invalid_argument("config: boolean expected for " + key + ", got " + v);
        };
        try {
            if (key == "orders") orders = value;
            else if (key == "item_context") item_context = value;
            else if (key == "user_context") user_context = value;
            else if (key == "time_kind") time_kind = value;
            else if (key == "min_transactions") min_transactions = std::stoull(value);
            else if (key == "split") split = value;
            else if (key == "train_end") train_end = std::stoll(value);
            else if (key == "valid_end") valid_end = std::stoll(value);
            else if (key == "context") context = value;
            else if (key == "k") k = static_cast<Index>(std::stoul(value));
            else if (key == "d1") d1 = static_cast<Index>(std::stoul(value));
            else if (key == "d2") d2 = static_cast<Index>(std::stoul(value));
            else if (key == "dim") dim = static_cast<Index>(std::stoul(value));
            else if (key == "user_dim") user_dim = static_cast<Index>(std::stoul(value));
            else if (key == "item_user_table") item_user_table = value;
            else if (key == "epochs") epochs = static_cast<Index>(std::stoul(value));
            else if (key == "alpha") alpha = std::stod(value);
            else if (key == "negatives") negatives = std::stoi(value);
            else if (key == "threads") threads = std::stoi(value);
            else if (key == "seed") seed = std::stoull(value);
            else if (key == "neg_sample_floor") neg_sample_floor = std::stod(value);
            else if (key == "use_user_bias") use_user_bias = as_bool(value);
            else if (key == "use_item_context") use_item_context = as_bool(value);
            else if (key == "use_user_context") use_user_context = as_bool(value);
            else if (key == "eval_negatives") eval_negatives = std::stoi(value);
            else if (key == "eval_seed") eval_seed = std::stoull(value);
            else if (key == "eval_k") eval_k = value;
            else if (key == "eval_max_queries") eval_max_queries = std::stoull(value);
            else if (key == "holdout_fraction") holdout_fraction = std::stod(value);
            else if (key == "holdout_seed") holdout_seed = std::stoull(value);
            else throw std::invalid_argument("config: unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
        }
    }

    static RunConfig from_file(const std::string& path) {
        RunConfig cfg;
        for (const auto& [k2, v] : read_kv_file(path)) cfg.apply(k2, v);
        return cfg;
    }
};

}  // namespace cemb
