#pragma once

// Purchase-log ingestion, train/valid/test splitting, and observation
// materialization.
//
// Orders file grammar (UTF-8 TSV, one event per line):
//   user_id<TAB>order_id<TAB>time<TAB>item_id
// `time` is either integer epoch-seconds or an integer order ordinal; all
// events of one order adopt the time of the order's first event in the file.
//
// Context file grammar: `id<TAB>token( token)*`, tokens compared byte-exact
// after trimming surrounding whitespace.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cemb/common.hpp"
#include "cemb/io_util.hpp"
#include "cemb/vocab.hpp"

namespace cemb {

struct Event {
    Index user = 0;
    Index item = 0;
    std::int64_t time = 0;  // epoch-seconds or order ordinal
    Index order = 0;        // dense per-user order index, time order
    std::uint64_t seq = 0;  // original file position, tiebreak
};

enum class SplitMode { LastOrder, TimeCutoff };
enum class ContextKind { Window, Days };

struct SplitSpec {
    SplitMode mode = SplitMode::LastOrder;
    std::int64_t train_end = 0;  // time-cutoff mode: t <= train_end -> train
    std::int64_t valid_end = 0;  // train_end < t <= valid_end -> valid
    ContextKind context = ContextKind::Window;
    Index k = 2;       // max sequence length, window mode
    Index d1 = 3;      // context-window days, day mode
    Index d2 = 7;      // label-window days, next-purchase eval
    void validate() const {
        if (mode == SplitMode::TimeCutoff && train_end >= valid_end)
            throw std::invalid_argument("split: train_end must be < valid_end");
        if (k < 1 || d1 < 1 || d2 < 1)
            throw std::invalid_argument("split: k, d1, d2 must be >= 1");
    }
};

struct IngestResult {
    Vocabulary vocab;
    std::vector<Event> events;  // sorted by (user, order, seq)
};

struct SplitResult {
    std::vector<Event> train, valid, test;
};

// One training example; ctx lists the most recent purchase first.
struct ObservationRef {
    Index user = 0;
    Index target = 0;
    std::span<const Index> ctx;
};

class ObservationSet {
public:
    std::size_t size() const { return targets_.size(); }

    ObservationRef get(std::size_t i) const {
        return {users_[i], targets_[i],
                {ctx_items_.data() + ctx_offsets_[i],
                 ctx_items_.data() + ctx_offsets_[i + 1]}};
    }

    void push(Index user, Index target, std::span<const Index> ctx) {
        users_.push_back(user);
        targets_.push_back(target);
        ctx_items_.insert(ctx_items_.end(), ctx.begin(), ctx.end());
        ctx_offsets_.push_back(ctx_items_.size());
    }

    // Per-index frequencies backing the negative-sampling tables.
    // Items: event counts in the train split. Tokens and user features:
    // per-occurrence counts over the materialized observations.
    const std::vector<Count>& item_counts() const { return item_counts_; }
    const std::vector<Count>& token_counts() const { return token_counts_; }
    const std::vector<Count>& ufeat_counts() const { return ufeat_counts_; }
    Count total_item_count() const { return total_items_; }
    Count total_token_count() const { return total_tokens_; }
    Count total_ufeat_count() const { return total_ufeats_; }

    void finalize_counts(const Vocabulary& vocab, const std::vector<Event>& train_events) {
        item_counts_.assign(vocab.n_items(), 0);
        token_counts_.assign(vocab.n_item_tokens(), 0);
        ufeat_counts_.assign(vocab.n_user_tokens(), 0);
        total_items_ = total_tokens_ = total_ufeats_ = 0;
        for (const Event& e : train_events) {
            item_counts_[e.item] += 1;
            ++total_items_;
        }
        for (std::size_t i = 0; i < size(); ++i) {
            ObservationRef o = get(i);
            auto count_item_tokens = [&](Index item) {
                for (Index w : vocab.tokens_of_item.tokens(item)) {
                    token_counts_[w] += 1;
                    ++total_tokens_;
                }
            };
            count_item_tokens(o.target);
            for (Index c : o.ctx) count_item_tokens(c);
            for (Index x : vocab.tokens_of_user.tokens(o.user)) {
                ufeat_counts_[x] += 1;
                ++total_ufeats_;
            }
        }
    }

    void save(BinaryWriter& w) const {
        w.u64(targets_.size());
        w.u32_array(users_.data(), users_.size());
        w.u32_array(targets_.data(), targets_.size());
        w.u64(ctx_items_.size());
        w.u32_array(ctx_items_.data(), ctx_items_.size());
        for (std::uint64_t off : ctx_offsets_) w.u64(off);
        auto save_counts = [&](const std::vector<Count>& c, Count total) {
            w.u64(c.size());
            for (Count v : c) w.u64(v);
            w.u64(total);
        };
        save_counts(item_counts_, total_items_);
        save_counts(token_counts_, total_tokens_);
        save_counts(ufeat_counts_, total_ufeats_);
    }

    static ObservationSet load(BinaryReader& r) {
        ObservationSet s;
        std::uint64_t n = r.u64();
        s.users_.resize(n);
        s.targets_.resize(n);
        r.u32_array(s.users_.data(), n);
        r.u32_array(s.targets_.data(), n);
        std::uint64_t nctx = r.u64();
        s.ctx_items_.resize(nctx);
        r.u32_array(s.ctx_items_.data(), nctx);
        s.ctx_offsets_.resize(n + 1);
        for (auto& off : s.ctx_offsets_) off = r.u64();
        auto load_counts = [&](std::vector<Count>& c, Count& total) {
            c.resize(r.u64());
            for (Count& v : c) v = r.u64();
            total = r.u64();
        };
        load_counts(s.item_counts_, s.total_items_);
        load_counts(s.token_counts_, s.total_tokens_);
        load_counts(s.ufeat_counts_, s.total_ufeats_);
        return s;
    }

private:
    std::vector<Index> users_, targets_;
    std::vector<std::uint64_t> ctx_offsets_{0};
    std::vector<Index> ctx_items_;
    std::vector<Count> item_counts_, token_counts_, ufeat_counts_;
    Count total_items_ = 0, total_tokens_ = 0, total_ufeats_ = 0;
};

namespace detail {

struct RawOrderRecord {
    std::string user_id, order_id, item_id;
    std::int64_t time = 0;
    std::uint64_t seq = 0;
};

inline std::int64_t parse_time_field(const std::string& s, const std::string& path,
                                     std::size_t lineno) {
    try {
        std::size_t pos = 0;
        std::int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": time field is not an integer: '" + s + "'");
    }
}

inline std::vector<RawOrderRecord> read_order_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open orders file: " + path);
    std::vector<RawOrderRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cols = split_on(line, '\t');
        if (cols.size() != 4)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 4 tab-separated columns, got " +
                                     std::to_string(cols.size()));
        RawOrderRecord r;
        r.user_id = std::string(trim(cols[0]));
        r.order_id = std::string(trim(cols[1]));
        r.item_id = std::string(trim(cols[3]));
        if (r.user_id.empty() || r.order_id.empty() || r.item_id.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": empty field");
        r.time = parse_time_field(std::string(trim(cols[2])), path, lineno);
        r.seq = records.size();
        records.push_back(std::move(r));
    }
    return records;
}

// Context file: id<TAB>token( token)*. Later lines for the same id replace
// earlier ones. Returns id -> token strings.
inline std::unordered_map<std::string, std::vector<std::string>>
read_context_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open context file: " + path);
    std::unordered_map<std::string, std::vector<std::string>> ctx;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected id<TAB>tokens");
        std::string id{trim(std::string_view(line).substr(0, tab))};
        if (id.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty id");
        std::vector<std::string> tokens;
        for (const auto& piece : split_on(std::string_view(line).substr(tab + 1), ' ')) {
            auto t = trim(piece);
            if (!t.empty()) tokens.emplace_back(t);
        }
        ctx[id] = std::move(tokens);
    }
    return ctx;
}

}  // namespace detail

// Builds vocabularies and the sorted event stream. Items with fewer than
// min_transactions purchase events are dropped, along with their events.
// `exclude_items` removes the named items up front (cold-start holdout).
inline IngestResult ingest(const std::string& orders_path,
                           const std::string& item_context_path,
                           const std::optional<std::string>& user_context_path,
                           Count min_transactions,
                           const std::set<std::string>* exclude_items = nullptr) {
    auto records = detail::read_order_records(orders_path);

    std::unordered_map<std::string, Count> item_event_counts;
    for (const auto& r : records) {
        if (exclude_items && exclude_items->count(r.item_id)) continue;
        item_event_counts[r.item_id] += 1;
    }

    IngestResult res;
    Vocabulary& vocab = res.vocab;

    // Vocab indices follow first appearance among surviving events.
    struct TmpEvent {
        Index user, item;
        std::int64_t time;
        std::uint64_t seq;
        std::string order_id;
    };
    std::vector<TmpEvent> surviving;
    surviving.reserve(records.size());
    for (const auto& r : records) {
        if (exclude_items && exclude_items->count(r.item_id)) continue;
        if (item_event_counts[r.item_id] < min_transactions) continue;
        TmpEvent e;
        e.user = vocab.users.intern(r.user_id);
        e.item = vocab.items.intern(r.item_id);
        e.time = r.time;
        e.seq = r.seq;
        e.order_id = r.order_id;
        surviving.push_back(std::move(e));
    }
    if (surviving.empty())
        throw std::runtime_error("ingest: corpus is empty after filtering (min_transactions=" +
                                 std::to_string(min_transactions) + ")");

    // Group each user's events into orders; an order's time is the time of
    // its first event in file order, and all its events adopt it.
    struct OrderGroup {
        std::int64_t time;
        std::uint64_t first_seq;
        std::vector<std::size_t> event_idx;
    };
    std::vector<std::map<std::string, OrderGroup>> per_user(vocab.n_users());
    for (std::size_t i = 0; i < surviving.size(); ++i) {
        const TmpEvent& e = surviving[i];
        auto [it, fresh] = per_user[e.user].try_emplace(e.order_id);
        if (fresh) {
            it->second.time = e.time;
            it->second.first_seq = e.seq;
        }
        it->second.event_idx.push_back(i);
    }

    for (Index u = 0; u < vocab.n_users(); ++u) {
        std::vector<const OrderGroup*> orders;
        orders.reserve(per_user[u].size());
        for (const auto& [id, g] : per_user[u]) orders.push_back(&g);
        std::sort(orders.begin(), orders.end(), [](const OrderGroup* a, const OrderGroup* b) {
            return a->time != b->time ? a->time < b->time : a->first_seq < b->first_seq;
        });
        for (Index oi = 0; oi < orders.size(); ++oi) {
            for (std::size_t idx : orders[oi]->event_idx) {
                const TmpEvent& t = surviving[idx];
                res.events.push_back(Event{t.user, t.item, orders[oi]->time, oi, t.seq});
            }
        }
    }

    // Token vocabularies from context files, restricted to in-vocab owners.
    auto build_tokens = [](const std::unordered_map<std::string, std::vector<std::string>>& ctx,
                           const Interner& owners, Interner& token_vocab, TokenLists& lists) {
        std::vector<Index> buf;
        for (Index i = 0; i < owners.size(); ++i) {
            buf.clear();
            auto it = ctx.find(owners.name(i));
            if (it != ctx.end())
                for (const auto& tok : it->second) buf.push_back(token_vocab.intern(tok));
            lists.append_owner(buf);
        }
    };
    build_tokens(detail::read_context_file(item_context_path), vocab.items,
                 vocab.item_tokens, vocab.tokens_of_item);
    if (user_context_path) {
        build_tokens(detail::read_context_file(*user_context_path), vocab.users,
                     vocab.user_tokens, vocab.tokens_of_user);
    } else {
        for (Index u = 0; u < vocab.n_users(); ++u) vocab.tokens_of_user.append_owner({});
    }
    return res;
}

// Last-order mode: per user, last order -> test, second last -> valid, rest
// -> train; users with fewer than 3 orders contribute to train only.
// Time-cutoff mode: t <= train_end -> train, t <= valid_end -> valid, else test.
inline SplitResult split(const std::vector<Event>& events, const SplitSpec& spec) {
    spec.validate();
    SplitResult out;
    if (spec.mode == SplitMode::TimeCutoff) {
        for (const Event& e : events) {
            if (e.time <= spec.train_end) out.train.push_back(e);
            else if (e.time <= spec.valid_end) out.valid.push_back(e);
            else out.test.push_back(e);
        }
        return out;
    }
    // Last-order: events are sorted by user; find each user's order count.
    std::size_t i = 0;
    while (i < events.size()) {
        std::size_t j = i;
        Index user = events[i].user;
        Index max_order = 0;
        while (j < events.size() && events[j].user == user) {
            max_order = std::max(max_order, events[j].order);
            ++j;
        }
        Index n_orders = max_order + 1;
        for (std::size_t q = i; q < j; ++q) {
            const Event& e = events[q];
            if (n_orders < 3) out.train.push_back(e);
            else if (e.order == n_orders - 1) out.test.push_back(e);
            else if (e.order == n_orders - 2) out.valid.push_back(e);
            else out.train.push_back(e);
        }
        i = j;
    }
    return out;
}

inline constexpr std::int64_t kSecondsPerDay = 86400;

// Window mode: context = up to k most recent purchases strictly earlier in
// time, most recent first. Day mode: all purchases within d1 days strictly
// before the target. Targets with no context emit nothing.
inline ObservationSet build_observations(const std::vector<Event>& train,
                                         const SplitSpec& spec,
                                         const Vocabulary& vocab) {
    spec.validate();
    ObservationSet obs;
    std::vector<Index> ctx;
    std::size_t i = 0;
    while (i < train.size()) {
        std::size_t j = i;
        Index user = train[i].user;
        while (j < train.size() && train[j].user == user) ++j;
        // train[i..j) is one user's history, ordered by (order, file pos).
        for (std::size_t t = i; t < j; ++t) {
            ctx.clear();
            for (std::size_t p = t; p-- > i;) {
                if (train[p].time >= train[t].time) continue;  // own/equal-time order
                if (spec.context == ContextKind::Window) {
                    ctx.push_back(train[p].item);
                    if (ctx.size() == spec.k) break;
                } else {
                    if (train[t].time - train[p].time > static_cast<std::int64_t>(spec.d1) * kSecondsPerDay)
                        break;  // older events only get older
                    ctx.push_back(train[p].item);
                }
            }
            if (!ctx.empty()) obs.push(user, train[t].item, ctx);
        }
        i = j;
    }
    obs.finalize_counts(vocab, train);
    return obs;
}

// ---- prepared-corpus cache ---------------------------------------------

struct PreparedCorpus {
    Vocabulary vocab;
    SplitResult splits;
    ObservationSet observations;
    SplitSpec spec;

    void save(const std::string& path) const {
        BinaryWriter w(path);
        w.bytes("CORP1", 5);
        vocab.save(w);
        auto save_events = [&](const std::vector<Event>& ev) {
            w.u64(ev.size());
            for (const Event& e : ev) {
                w.u32(e.user);
                w.u32(e.item);
                w.i64(e.time);
                w.u32(e.order);
                w.u64(e.seq);
            }
        };
        save_events(splits.train);
        save_events(splits.valid);
        save_events(splits.test);
        observations.save(w);
        w.u32(static_cast<std::uint32_t>(spec.mode));
        w.u32(static_cast<std::uint32_t>(spec.context));
        w.i64(spec.train_end);
        w.i64(spec.valid_end);
        w.u32(spec.k);
        w.u32(spec.d1);
        w.u32(spec.d2);
        w.footer_hash();
        w.close();
    }

    static PreparedCorpus load(const std::string& path) {
        BinaryReader r(path);
        char magic[5];
        r.bytes(magic, 5);
        if (std::string_view(magic, 5) != "CORP1")
            throw std::runtime_error("not a prepared-corpus file: " + path);
        PreparedCorpus pc;
        pc.vocab = Vocabulary::load(r);
        auto load_events = [&](std::vector<Event>& ev) {
            ev.resize(r.u64());
            for (Event& e : ev) {
                e.user = r.u32();
                e.item = r.u32();
                e.time = r.i64();
                e.order = r.u32();
                e.seq = r.u64();
            }
        };
        load_events(pc.splits.train);
        load_events(pc.splits.valid);
        load_events(pc.splits.test);
        pc.observations = ObservationSet::load(r);
        pc.spec.mode = static_cast<SplitMode>(r.u32());
        pc.spec.context = static_cast<ContextKind>(r.u32());
        pc.spec.train_end = r.i64();
        pc.spec.valid_end = r.i64();
        pc.spec.k = r.u32();
        pc.spec.d1 = r.u32();
        pc.spec.d2 = r.u32();
        r.verify_footer_hash();
        return pc;
    }
};

}  // namespace cemb
