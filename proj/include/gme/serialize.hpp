#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "gme/error.hpp"
#include "gme/types.hpp"

namespace gme {

// All on-disk formats are little-endian. GMM payloads carry 32-bit floats,
// trainable weights carry 64-bit floats (see README, "File formats").

constexpr std::uint32_t kFormatVersion = 1;

inline constexpr char kGmmMagic[4] = {'G', 'M', 'M', 'B'};      // single embedding
inline constexpr char kRecordsMagic[4] = {'G', 'M', 'R', 'S'};  // id'd embedding stream
inline constexpr char kWeightsMagic[4] = {'P', 'G', 'W', 'T'};  // generator weights
inline constexpr char kIndexMagic[4] = {'G', 'I', 'V', 'F'};    // inverted-file index

/// Round a double through the 32-bit float grid (the on-disk precision).
inline double to_f32_grid(double x) { return static_cast<double>(static_cast<float>(x)); }

struct ByteWriter {
    std::vector<std::uint8_t> bytes;

    void magic(const char m[4]) { bytes.insert(bytes.end(), m, m + 4); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(double v) {
        float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        u32(u);
    }
    void f64(double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        u64(u);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    void f32_block(std::span<const double> v) {
        for (double x : v) f32(x);
    }
    void f64_block(std::span<const double> v) {
        for (double x : v) f64(x);
    }
};

struct ByteReader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    explicit ByteReader(std::span<const std::uint8_t> b) : bytes(b) {}

    void require(std::size_t n) const {
        if (pos + n > bytes.size()) throw CorruptFormatError("truncated payload");
    }
    void expect_magic(const char m[4], const char* what) {
        require(4);
        if (std::memcmp(bytes.data() + pos, m, 4) != 0)
            throw CorruptFormatError(std::string("bad magic for ") + what);
        pos += 4;
    }
    void expect_version(std::uint32_t expected) {
        std::uint32_t v = u32();
        if (v != expected)
            throw VersionError("unsupported format version " + std::to_string(v));
    }
    std::uint32_t u32() {
        require(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        require(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f32() {
        std::uint32_t u = u32();
        float f;
        std::memcpy(&f, &u, 4);
        return static_cast<double>(f);
    }
    double f64() {
        std::uint64_t u = u64();
        double d;
        std::memcpy(&d, &u, 8);
        return d;
    }
    std::string str() {
        std::uint32_t n = u32();
        require(n);
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
        pos += n;
        return s;
    }
    void f32_block(std::span<double> out) {
        for (double& x : out) x = f32();
    }
    void f64_block(std::span<double> out) {
        for (double& x : out) x = f64();
    }
    void expect_end() const {
        if (pos != bytes.size()) throw CorruptFormatError("trailing bytes after payload");
    }
};

// ---------------------------------------------------------------------------
// GmmEmbedding <-> bytes
//   magic "GMMB" | u32 version | u32 K | u32 d | f32 means K*d | f32 logvars K*d
// ---------------------------------------------------------------------------

inline void write_gmm_body(ByteWriter& w, const GmmEmbedding& g) {
    w.u32(static_cast<std::uint32_t>(g.components));
    w.u32(static_cast<std::uint32_t>(g.dim));
    w.f32_block(g.means);
    w.f32_block(g.log_vars);
}

inline GmmEmbedding read_gmm_body(ByteReader& r) {
    std::uint32_t k = r.u32();
    std::uint32_t d = r.u32();
    if (k < 1 || d < 1) throw CorruptFormatError("embedding with zero components or dimensions");
    GmmEmbedding g(k, d);
    r.f32_block(g.means);
    r.f32_block(g.log_vars);
    g.validate();
    return g;
}

inline std::vector<std::uint8_t> serialize_gmm(const GmmEmbedding& g) {
    g.validate();
    ByteWriter w;
    w.magic(kGmmMagic);
    w.u32(kFormatVersion);
    write_gmm_body(w, g);
    return std::move(w.bytes);
}

inline GmmEmbedding deserialize_gmm(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_magic(kGmmMagic, "GmmEmbedding");
    r.expect_version(kFormatVersion);
    GmmEmbedding g = read_gmm_body(r);
    r.expect_end();
    return g;
}

/// Round every parameter through the on-disk f32 grid.
inline GmmEmbedding quantize_f32(const GmmEmbedding& g) {
    GmmEmbedding q = g;
    for (double& x : q.means) x = to_f32_grid(x);
    for (double& x : q.log_vars) x = to_f32_grid(x);
    return q;
}

// ---------------------------------------------------------------------------
// Embedding record stream (output of `gme embed`)
//   magic "GMRS" | u32 version | u64 count | count x (str id, gmm body)
// ---------------------------------------------------------------------------

struct GmmRecord {
    std::string id;
    GmmEmbedding gmm;
};

inline std::vector<std::uint8_t> serialize_gmm_records(std::span<const GmmRecord> records) {
    ByteWriter w;
    w.magic(kRecordsMagic);
    w.u32(kFormatVersion);
    w.u64(records.size());
    for (const GmmRecord& rec : records) {
        w.str(rec.id);
        write_gmm_body(w, rec.gmm);
    }
    return std::move(w.bytes);
}

inline std::vector<GmmRecord> deserialize_gmm_records(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_magic(kRecordsMagic, "embedding records");
    r.expect_version(kFormatVersion);
    std::uint64_t count = r.u64();
    std::vector<GmmRecord> records;
    records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        GmmRecord rec;
        rec.id = r.str();
        rec.gmm = read_gmm_body(r);
        records.push_back(std::move(rec));
    }
    r.expect_end();
    return records;
}

// ---------------------------------------------------------------------------
// ParamGenWeights <-> bytes (f64 payload)
//   magic "PGWT" | u32 version | u32 K | u32 d |
//   f64 seeds K*d | f64 W1 d*d | f64 b1 d | f64 W2 d*d | f64 b2 d
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> serialize_weights(const ParamGenWeights& w) {
    w.validate();
    ByteWriter out;
    out.magic(kWeightsMagic);
    out.u32(kFormatVersion);
    out.u32(static_cast<std::uint32_t>(w.components));
    out.u32(static_cast<std::uint32_t>(w.dim));
    out.f64_block(w.seeds);
    out.f64_block(w.map_mean.weight);
    out.f64_block(w.map_mean.bias);
    out.f64_block(w.map_logvar.weight);
    out.f64_block(w.map_logvar.bias);
    return std::move(out.bytes);
}

inline ParamGenWeights deserialize_weights(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_magic(kWeightsMagic, "generator weights");
    r.expect_version(kFormatVersion);
    std::uint32_t k = r.u32();
    std::uint32_t d = r.u32();
    if (d < 1) throw CorruptFormatError("weights with zero dimensions");
    ParamGenWeights w;
    w.components = k;
    w.dim = d;
    w.seeds.assign(static_cast<std::size_t>(k) * d, 0.0);
    w.map_mean = AffineMap(d);
    w.map_logvar = AffineMap(d);
    r.f64_block(w.seeds);
    r.f64_block(w.map_mean.weight);
    r.f64_block(w.map_mean.bias);
    r.f64_block(w.map_logvar.weight);
    r.f64_block(w.map_logvar.bias);
    r.expect_end();
    w.validate();
    return w;
}

// ---------------------------------------------------------------------------
// Whole-file helpers
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path);
    return bytes;
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path);
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace gme
