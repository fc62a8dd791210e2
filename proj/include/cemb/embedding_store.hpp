#pragma once

// The dense embedding tables and their score functions.
//
// Two item tables realize the asymmetric scores: item_in holds an item's
// representation as a member of a purchase context, item_out its
// representation as the candidate next purchase. score(j given i) is
// <item_out[j], item_in[i]> and is generally != score(i given j).
//
// Templated on the scalar so the exact same scoring/gradient code runs in
// float32 for training and float64 for gradient checks.
//
// Thread-safety: reads are safe from any number of threads. The trainer
// performs unsynchronized element-wise writes (Hogwild contract); callers
// own the consistency model.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cemb/common.hpp"
#include "cemb/io_util.hpp"

namespace cemb {

template <typename Real>
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<Real> data;

    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        data.assign(r * c, Real(0));
    }
    Real* row(Index i) { return data.data() + static_cast<std::size_t>(i) * cols; }
    const Real* row(Index i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
    bool empty() const { return rows == 0; }
};

template <typename Real>
inline double dot(const Real* a, const Real* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

struct VocabSizes {
    Index n_items = 0, n_users = 0, n_item_tokens = 0, n_user_tokens = 0;
};

template <typename Real>
class EmbeddingStoreT {
public:
    Mat<Real> item_in;    // Z^I,  M x P
    Mat<Real> item_out;   // Z~^I, M x P
    Mat<Real> user;       // Z^U,  N x P_U
    Mat<Real> item_user;  // Z^IU, M x P_U, allocated only in untied mode
    Mat<Real> word;       // Z^W,  n_w x P
    Mat<Real> user_feat;  // Z^X,  n_x x P_U

    Index dim = 0;       // P
    Index user_dim = 0;  // P_U

    bool tied() const { return item_user.empty(); }
    Index n_items() const { return static_cast<Index>(item_in.rows); }
    Index n_users() const { return static_cast<Index>(user.rows); }

    // Every entry i.i.d. uniform on [-0.5/dim, 0.5/dim] of its table's dim,
    // drawn from a single seeded stream in a fixed table order.
    static EmbeddingStoreT init(const VocabSizes& sizes, Index p, Index p_user,
                                bool tied, std::uint64_t seed) {
        if (p < 1 || p_user < 1) throw std::invalid_argument("init: dims must be >= 1");
        if (sizes.n_items == 0 || sizes.n_users == 0)
            throw std::invalid_argument("init: empty item or user vocabulary");
        if (tied && p_user != p)
            throw std::invalid_argument("init: tied mode requires user_dim == dim");
        EmbeddingStoreT s;
        s.dim = p;
        s.user_dim = p_user;
        s.item_in.resize(sizes.n_items, p);
        s.item_out.resize(sizes.n_items, p);
        s.user.resize(sizes.n_users, p_user);
        if (!tied) s.item_user.resize(sizes.n_items, p_user);
        s.word.resize(sizes.n_item_tokens, p);
        s.user_feat.resize(sizes.n_user_tokens, p_user);

        Rng rng(seed);
        auto fill = [&rng](Mat<Real>& m) {
            const double half = 0.5 / static_cast<double>(m.cols);
            for (Real& v : m.data) v = static_cast<Real>(rng.uniform(-half, half));
        };
        fill(s.item_in);
        fill(s.item_out);
        fill(s.user);
        if (!tied) fill(s.item_user);
        fill(s.word);
        fill(s.user_feat);
        return s;
    }

    // s(j given i) = <z~_j, z_i>
    double score_pair(Index j, Index i) const {
        return dot(item_out.row(j), item_in.row(i), dim);
    }

    // Left-to-right mean of the item-in rows over ctx.
    void pool(std::span<const Index> ctx, double* out) const {
        for (Index d = 0; d < dim; ++d) out[d] = 0.0;
        for (Index c : ctx) {
            const Real* r = item_in.row(c);
            for (Index d = 0; d < dim; ++d) out[d] += static_cast<double>(r[d]);
        }
        const double inv = 1.0 / static_cast<double>(ctx.size());
        for (Index d = 0; d < dim; ++d) out[d] *= inv;
    }

    // s(j given ctx) = <z~_j, mean of item-in rows over ctx>
    double score_seq(Index j, std::span<const Index> ctx) const {
        if (ctx.empty()) throw std::invalid_argument("score_seq: empty context");
        std::vector<double> pooled(dim);
        pool(ctx, pooled.data());
        const Real* zj = item_out.row(j);
        double s = 0.0;
        for (Index d = 0; d < dim; ++d) s += static_cast<double>(zj[d]) * pooled[d];
        return s;
    }

    // s(j, u): user-preference bias. Tied mode reads item_out, untied the
    // dedicated item_user table.
    double score_user(Index j, Index u) const {
        const Real* zi = tied() ? item_out.row(j) : item_user.row(j);
        return dot(zi, user.row(u), user_dim);
    }

    // s(w, i): token relatedness binds to the item-in row.
    double score_token(Index w, Index i) const {
        return dot(word.row(w), item_in.row(i), dim);
    }

    double score_ufeat(Index x, Index u) const {
        return dot(user_feat.row(x), user.row(u), user_dim);
    }

    // Appends cold items: inferred item-in rows; item-out (and item_user)
    // rows are zero. Cold items are meant to appear in contexts only;
    // evaluation protocols cap candidates at the trained row count.
    void append_items(const std::vector<std::vector<float>>& item_in_rows) {
        const std::size_t extra = item_in_rows.size();
        auto grow = [extra](Mat<Real>& m) {
            m.data.resize((m.rows + extra) * m.cols, Real(0));
            m.rows += extra;
        };
        const std::size_t old_rows = item_in.rows;
        grow(item_in);
        grow(item_out);
        if (!tied()) grow(item_user);
        for (std::size_t r = 0; r < extra; ++r) {
            if (item_in_rows[r].size() != dim)
                throw std::invalid_argument("append_items: row dim mismatch");
            Real* dst = item_in.row(static_cast<Index>(old_rows + r));
            for (Index d = 0; d < dim; ++d) dst[d] = static_cast<Real>(item_in_rows[r][d]);
        }
    }

    bool all_finite() const {
        auto ok = [](const Mat<Real>& m) {
            for (Real v : m.data)
                if (!std::isfinite(static_cast<double>(v))) return false;
            return true;
        };
        return ok(item_in) && ok(item_out) && ok(user) && ok(item_user) && ok(word) &&
               ok(user_feat);
    }

    // ---- snapshot persistence (float32 on disk) ----

    void save(const std::string& path, const std::string& config = "") const {
        BinaryWriter w(path);
        w.bytes("CEMB1", 5);
        w.str(config);
        std::vector<std::pair<std::string, const Mat<Real>*>> tables = named_tables();
        w.u32(static_cast<std::uint32_t>(tables.size()));
        for (const auto& [name, m] : tables) {
            w.str(name);
            w.u64(m->rows);
            w.u32(static_cast<std::uint32_t>(m->cols));
            if constexpr (std::is_same_v<Real, float>) {
                w.f32_array(m->data.data(), m->data.size());
            } else {
                for (Real v : m->data) w.f32(static_cast<float>(v));
            }
        }
        w.footer_hash();
        w.close();
    }

    struct Loaded {
        EmbeddingStoreT store;
        std::string config;
    };

    static Loaded load(const std::string& path) {
        BinaryReader r(path);
        char magic[5];
        r.bytes(magic, 5);
        if (std::string_view(magic, 5) != "CEMB1")
            throw std::runtime_error("not an embedding snapshot: " + path);
        Loaded out;
        out.config = r.str();
        std::uint32_t n_tables = r.u32();
        for (std::uint32_t t = 0; t < n_tables; ++t) {
            std::string name = r.str(256);
            std::uint64_t rows = r.u64();
            std::uint32_t cols = r.u32();
            Mat<Real>* m = out.store.table_by_name(name);
            if (!m) throw std::runtime_error("unknown table '" + name + "' in " + path);
            m->resize(rows, cols);
            if constexpr (std::is_same_v<Real, float>) {
                if (!m->data.empty()) r.f32_array(m->data.data(), m->data.size());
            } else {
                for (Real& v : m->data) v = static_cast<Real>(r.f32());
            }
        }
        r.verify_footer_hash();
        EmbeddingStoreT& s = out.store;
        s.dim = static_cast<Index>(s.item_in.cols);
        s.user_dim = static_cast<Index>(s.user.cols);
        if (!s.item_out.empty() && s.item_in.rows != s.item_out.rows)
            throw std::runtime_error("snapshot item tables disagree on rows: " + path);
        return out;
    }

    void export_text(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open for writing: " + path);
        char buf[64];
        for (const auto& [name, m] : named_tables()) {
            out << "# table " << name << ' ' << m->rows << ' ' << m->cols << '\n';
            for (std::size_t r = 0; r < m->rows; ++r) {
                out << r;
                const Real* row = m->data.data() + r * m->cols;
                for (std::size_t c = 0; c < m->cols; ++c) {
                    std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(row[c]));
                    out << buf;
                }
                out << '\n';
            }
        }
        out.close();
        if (!out) throw std::runtime_error("write failed: " + path);
    }

private:
    std::vector<std::pair<std::string, const Mat<Real>*>> named_tables() const {
        std::vector<std::pair<std::string, const Mat<Real>*>> t = {
            {"item_in", &item_in}, {"item_out", &item_out}, {"user", &user}};
        if (!tied()) t.emplace_back("item_user", &item_user);
        t.emplace_back("word", &word);
        t.emplace_back("user_feat", &user_feat);
        return t;
    }

    Mat<Real>* table_by_name(const std::string& name) {
        if (name == "item_in") return &item_in;
        if (name == "item_out") return &item_out;
        if (name == "user") return &user;
        if (name == "item_user") return &item_user;
        if (name == "word") return &word;
        if (name == "user_feat") return &user_feat;
        return nullptr;
    }
};

using EmbeddingStore = EmbeddingStoreT<float>;

template <typename To, typename From>
inline EmbeddingStoreT<To> convert_store(const EmbeddingStoreT<From>& s) {
    EmbeddingStoreT<To> out;
    out.dim = s.dim;
    out.user_dim = s.user_dim;
    auto conv = [](const Mat<From>& a, Mat<To>& b) {
        b.rows = a.rows;
        b.cols = a.cols;
        b.data.assign(a.data.begin(), a.data.end());
    };
    conv(s.item_in, out.item_in);
    conv(s.item_out, out.item_out);
    conv(s.user, out.user);
    conv(s.item_user, out.item_user);
    conv(s.word, out.word);
    conv(s.user_feat, out.user_feat);
    return out;
}

}  // namespace cemb
