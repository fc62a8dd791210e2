#pragma once

// Little-endian binary readers/writers with running FNV-1a checksums,
// plus the key=value manifest format shared by prepare/train/evaluate.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cemb/common.hpp"

namespace cemb {

class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path)
        : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    }

    void bytes(const void* p, std::size_t n) {
        if (n == 0) return;
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        hash_ = fnv1a64(p, n, hash_);
    }

    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void i64(std::int64_t v) { bytes(&v, 8); }
    void f32(float v) { bytes(&v, 4); }

    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void f32_array(const float* p, std::size_t n) { bytes(p, n * sizeof(float)); }

    void u32_array(const std::uint32_t* p, std::size_t n) { bytes(p, n * 4); }

    std::uint64_t hash() const { return hash_; }

    // Writes the running checksum itself; not folded into the hash.
    void footer_hash() {
        std::uint64_t h = hash_;
        out_.write(reinterpret_cast<const char*>(&h), 8);
    }

    void close() {
        out_.close();
        if (!out_) throw std::runtime_error("write failed: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
    std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string& path)
        : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw std::runtime_error("cannot open for reading: " + path);
    }

    void bytes(void* p, std::size_t n) {
        if (n == 0) return;
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw std::runtime_error("truncated file: " + path_);
        hash_ = fnv1a64(p, n, hash_);
    }

    std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
    std::int64_t i64() { std::int64_t v; bytes(&v, 8); return v; }
    float f32() { float v; bytes(&v, 4); return v; }

    std::string str(std::size_t max_len = 1u << 20) {
        std::uint32_t n = u32();
        if (n > max_len) throw std::runtime_error("corrupt string length in " + path_);
        std::string s(n, '\0');
        if (n) bytes(s.data(), n);
        return s;
    }

    void f32_array(float* p, std::size_t n) { bytes(p, n * sizeof(float)); }
    void u32_array(std::uint32_t* p, std::size_t n) { bytes(p, n * 4); }

    std::uint64_t hash() const { return hash_; }

    // Reads the stored checksum and compares with the running one.
    void verify_footer_hash() {
        std::uint64_t expect = hash_;
        std::uint64_t stored;
        in_.read(reinterpret_cast<char*>(&stored), 8);
        if (static_cast<std::size_t>(in_.gcount()) != 8)
            throw std::runtime_error("truncated file (missing checksum): " + path_);
        if (stored != expect)
            throw std::runtime_error("checksum mismatch in " + path_ +
                                     " (file corrupted or not a matching format)");
    }

private:
    std::ifstream in_;
    std::string path_;
    std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

// ---- key=value manifests ---------------------------------------------------

inline void write_kv_file(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
    out.close();
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        auto eq = sv.find('=');
        if (eq == std::string_view::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        std::string key{trim(sv.substr(0, eq))};
        std::string val{trim(sv.substr(eq + 1))};
        if (key.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = val;
    }
    return kv;
}

}  // namespace cemb
