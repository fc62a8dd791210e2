#pragma once

// Synthetic purchase-log generator with planted structure, used as the
// recovery oracle for training and evaluation:
//
//   - directed pairs a -> b: an order {a} is followed by {b} with
//     probability `strength` (else a filler item), never the reverse;
//   - combos (a, c) -> d: an order {a, c} is followed by {d}, with d
//     distinct from a's individual target b;
//   - mutual pairs {m1, m2}: trained in both directions and used as
//     multi-item final orders, giving within-basket signal;
//   - a filler order separates episodes, so an item's follower outside its
//     planted episode is uniform filler noise.
//
// Items share a category token ("c<k>") with their neighbors and carry a
// unique token ("i<id>"); categories double as classification-probe labels.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cemb/common.hpp"
#include "cemb/corpus.hpp"

namespace cemb {

struct SynthSpec {
    Index n_items = 500;
    Index n_users = 2000;
    Index n_pairs = 60;
    Index n_combos = 30;
    Index n_mutual = 40;
    double strength = 0.95;
    double noise_rate = 0.2;  // extra filler orders between episodes
    Index min_episodes = 12, max_episodes = 24;
    Index items_per_category = 10;
    double final_mutual_basket_prob = 0.8;
    bool ordinal_time = true;  // false: one order per day, epoch-seconds
    std::uint64_t seed = 1;

    void validate() const {
        if (n_items < 2 || n_users < 1) throw std::invalid_argument("synth: corpus too small");
        if (2 * n_pairs + 2 * n_combos + 2 * n_mutual > n_items)
            throw std::invalid_argument("synth: planted structure needs more items");
        if (min_episodes < 3 || max_episodes < min_episodes)
            throw std::invalid_argument("synth: bad episode range");
        if (strength < 0.0 || strength > 1.0)
            throw std::invalid_argument("synth: strength must be in [0,1]");
        if (n_combos > 0 && n_pairs == 0)
            throw std::invalid_argument("synth: combos require planted pairs to compete with");
    }
};

struct PlantedPair {
    Index source, target;
    double strength;
};
struct PlantedCombo {
    Index a, c, d;
};
struct MutualPair {
    Index m1, m2;
};

struct SynthOrder {
    Index user;
    std::int64_t time;
    std::vector<Index> items;
};

struct SynthCorpus {
    SynthSpec spec;
    std::vector<PlantedPair> pairs;
    std::vector<PlantedCombo> combos;
    std::vector<MutualPair> mutuals;
    std::vector<Index> fillers;
    std::vector<SynthOrder> orders;

    static std::string item_name(Index i) { return "p" + std::to_string(i); }
    static std::string user_name(Index u) { return "u" + std::to_string(u); }
    std::string category_name(Index i) const {
        return "c" + std::to_string(i / spec.items_per_category);
    }

    void write_orders(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open for writing: " + path);
        std::size_t order_no = 0;
        for (const SynthOrder& o : orders) {
            for (Index item : o.items)
                out << user_name(o.user) << '\t' << "o" << order_no << '\t' << o.time << '\t'
                    << item_name(item) << '\n';
            ++order_no;
        }
        out.close();
        if (!out) throw std::runtime_error("write failed: " + path);
    }

    void write_item_context(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open for writing: " + path);
        for (Index i = 0; i < spec.n_items; ++i)
            out << item_name(i) << '\t' << category_name(i) << ' ' << 'i' << i << '\n';
        out.close();
        if (!out) throw std::runtime_error("write failed: " + path);
    }

    // Item -> category label, for the classification probe.
    void write_labels(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open for writing: " + path);
        for (Index i = 0; i < spec.n_items; ++i)
            out << item_name(i) << '\t' << category_name(i) << '\n';
        out.close();
        if (!out) throw std::runtime_error("write failed: " + path);
    }

    void write_ground_truth(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open for writing: " + path);
        for (const auto& p : pairs)
            out << "pair\t" << item_name(p.source) << '\t' << item_name(p.target) << '\t'
                << p.strength << '\n';
        for (const auto& c : combos)
            out << "combo\t" << item_name(c.a) << '\t' << item_name(c.c) << '\t'
                << item_name(c.d) << '\n';
        for (const auto& m : mutuals)
            out << "mutual\t" << item_name(m.m1) << '\t' << item_name(m.m2) << '\n';
        out.close();
        if (!out) throw std::runtime_error("write failed: " + path);
    }
};

inline SynthCorpus generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    SynthCorpus c;
    c.spec = spec;

    // Item pools: [sources][pair targets][combo partners][combo targets]
    // [mutuals...][fillers...].
    Index next = 0;
    for (Index i = 0; i < spec.n_pairs; ++i)
        c.pairs.push_back({i, spec.n_pairs + i, spec.strength});
    next = 2 * spec.n_pairs;
    for (Index i = 0; i < spec.n_combos; ++i) {
        // Combo sources reuse pair sources so the higher-order target
        // competes with the individual target.
        c.combos.push_back({i % spec.n_pairs, next + i, next + spec.n_combos + i});
    }
    next += 2 * spec.n_combos;
    for (Index i = 0; i < spec.n_mutual; ++i) {
        c.mutuals.push_back({next, next + 1});
        next += 2;
    }
    for (Index i = next; i < spec.n_items; ++i) c.fillers.push_back(i);

    Rng rng(spec.seed);
    auto filler = [&]() -> Index {
        if (!c.fillers.empty())
            return c.fillers[static_cast<std::size_t>(rng.below(c.fillers.size()))];
        return static_cast<Index>(rng.below(spec.n_items));
    };

    for (Index u = 0; u < spec.n_users; ++u) {
        const Index n_ep =
            spec.min_episodes +
            static_cast<Index>(rng.below(spec.max_episodes - spec.min_episodes + 1));
        std::vector<std::vector<Index>> user_orders;
        auto push = [&](std::vector<Index> items) { user_orders.push_back(std::move(items)); };

        for (Index ep = 0; ep < n_ep; ++ep) {
            // Weighted choice among the available episode types.
            const double w_pair = spec.n_pairs ? 0.35 : 0.0;
            const double w_combo = spec.n_combos ? 0.15 : 0.0;
            const double w_mutual = spec.n_mutual ? 0.25 : 0.0;
            const double w_noise = 0.25;
            double r = rng.real() * (w_pair + w_combo + w_mutual + w_noise);
            if ((r -= w_pair) < 0) {
                const auto& p = c.pairs[static_cast<std::size_t>(rng.below(spec.n_pairs))];
                push({p.source});
                push({rng.bernoulli(p.strength) ? p.target : filler()});
            } else if ((r -= w_combo) < 0) {
                const auto& cb = c.combos[static_cast<std::size_t>(rng.below(spec.n_combos))];
                push({cb.a, cb.c});
                push({rng.bernoulli(spec.strength) ? cb.d : filler()});
            } else if ((r -= w_mutual) < 0) {
                const auto& m = c.mutuals[static_cast<std::size_t>(rng.below(spec.n_mutual))];
                if (rng.bernoulli(0.5)) {
                    push({m.m1});
                    push({m.m2});
                } else {
                    push({m.m2});
                    push({m.m1});
                }
            } else {
                push({filler()});
            }
            // Separator: an item's follower outside its episode is filler.
            push({filler()});
            if (rng.bernoulli(spec.noise_rate)) push({filler()});
        }
        if (spec.n_mutual && rng.bernoulli(spec.final_mutual_basket_prob)) {
            const auto& m = c.mutuals[static_cast<std::size_t>(rng.below(spec.n_mutual))];
            push({m.m1, m.m2});
        }

        for (std::size_t oi = 0; oi < user_orders.size(); ++oi) {
            SynthOrder o;
            o.user = u;
            o.time = spec.ordinal_time ? static_cast<std::int64_t>(oi)
                                       : static_cast<std::int64_t>(oi) * kSecondsPerDay;
            o.items = std::move(user_orders[oi]);
            c.orders.push_back(std::move(o));
        }
    }
    return c;
}

}  // namespace cemb
