#pragma once

// Interned vocabularies for users, items, item tokens and user-feature
// tokens. Indices are dense [0, size) in first-appearance order; counts are
// corpus frequencies.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cemb/common.hpp"
#include "cemb/io_util.hpp"

namespace cemb {

class Interner {
public:
    Index intern(std::string_view name) {
        auto it = index_.find(std::string(name));
        if (it != index_.end()) {
            counts_[it->second] += 1;
            return it->second;
        }
        Index id = static_cast<Index>(names_.size());
        names_.emplace_back(name);
        counts_.push_back(1);
        index_.emplace(names_.back(), id);
        return id;
    }

    Index lookup(std::string_view name) const {
        auto it = index_.find(std::string(name));
        return it == index_.end() ? kInvalidIndex : it->second;
    }

    Index size() const { return static_cast<Index>(names_.size()); }
    const std::string& name(Index i) const { return names_[i]; }
    Count count(Index i) const { return counts_[i]; }
    const std::vector<Count>& counts() const { return counts_; }
    void set_count(Index i, Count c) { counts_[i] = c; }

    void save(BinaryWriter& w) const {
        w.u32(size());
        for (Index i = 0; i < size(); ++i) {
            w.str(names_[i]);
            w.u64(counts_[i]);
        }
    }

    static Interner load(BinaryReader& r) {
        Interner v;
        std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            std::string name = r.str();
            Count c = r.u64();
            Index id = v.intern(name);
            v.counts_[id] = c;
        }
        return v;
    }

private:
    std::vector<std::string> names_;
    std::vector<Count> counts_;
    std::unordered_map<std::string, Index> index_;
};

// Flattened jagged list: token indices per owner (item or user).
// Owners are appended in index order 0, 1, 2, ...
class TokenLists {
public:
    TokenLists() : offsets_{0} {}

    void append_owner(std::span<const Index> tokens) {
        tokens_.insert(tokens_.end(), tokens.begin(), tokens.end());
        offsets_.push_back(static_cast<Index>(tokens_.size()));
    }

    std::span<const Index> tokens(Index owner) const {
        return {tokens_.data() + offsets_[owner], tokens_.data() + offsets_[owner + 1]};
    }

    Index owners() const { return static_cast<Index>(offsets_.size() - 1); }
    std::size_t total_tokens() const { return tokens_.size(); }

    void save(BinaryWriter& w) const {
        w.u32(owners());
        w.u64(tokens_.size());
        w.u32_array(offsets_.data(), offsets_.size());
        if (!tokens_.empty()) w.u32_array(tokens_.data(), tokens_.size());
    }

    static TokenLists load(BinaryReader& r) {
        TokenLists t;
        std::uint32_t owners = r.u32();
        std::uint64_t total = r.u64();
        t.offsets_.resize(owners + 1);
        r.u32_array(t.offsets_.data(), t.offsets_.size());
        t.tokens_.resize(total);
        if (total) r.u32_array(t.tokens_.data(), total);
        return t;
    }

private:
    std::vector<Index> offsets_;  // owners()+1 entries
    std::vector<Index> tokens_;
};

struct Vocabulary {
    Interner users;
    Interner items;
    Interner item_tokens;   // size n_w
    Interner user_tokens;   // size n_x
    TokenLists tokens_of_item;  // item index -> item-token indices
    TokenLists tokens_of_user;  // user index -> user-token indices

    Index n_users() const { return users.size(); }
    Index n_items() const { return items.size(); }
    Index n_item_tokens() const { return item_tokens.size(); }
    Index n_user_tokens() const { return user_tokens.size(); }

    void save(BinaryWriter& w) const {
        users.save(w);
        items.save(w);
        item_tokens.save(w);
        user_tokens.save(w);
        tokens_of_item.save(w);
        tokens_of_user.save(w);
    }

    static Vocabulary load(BinaryReader& r) {
        Vocabulary v;
        v.users = Interner::load(r);
        v.items = Interner::load(r);
        v.item_tokens = Interner::load(r);
        v.user_tokens = Interner::load(r);
        v.tokens_of_item = TokenLists::load(r);
        v.tokens_of_user = TokenLists::load(r);
        return v;
    }
};

}  // namespace cemb
