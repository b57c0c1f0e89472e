#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "kcs/error.hpp"
#include "kcs/particles.hpp"
#include "kcs/phase_grid.hpp"

namespace kcs {

// "KCS1" binary snapshot, all fields little-endian:
//   char[4] magic | u32 solver (0 grid, 1 particles) | u32 d | u32 reserved
//   u64 n0 (Nx or N) | u64 n1 (Nv or 0) | f64 extent0 (Lx) | f64 extent1 (Lv)
//   f64 t | f64 sigma | f64 mass | u64 payload_len (number of f64 values)
//   payload: grid x-major f[j * Nv + k]; particles [x_1..x_d, v_1..v_d] per particle

enum class SolverTag : std::uint32_t { Grid = 0, Particles = 1 };

struct SnapshotHeader {
    std::array<char, 4> magic{'K', 'C', 'S', '1'};
    SolverTag solver = SolverTag::Grid;
    std::uint32_t d = 1;
    std::uint64_t n0 = 0;
    std::uint64_t n1 = 0;
    double extent0 = 0.0;
    double extent1 = 0.0;
    double t = 0.0;
    double sigma = 0.0;
    double mass = 0.0;
    std::uint64_t payload_len = 0;
};

inline constexpr std::size_t kSnapshotHeaderBytes = 4 + 3 * 4 + 2 * 8 + 5 * 8 + 8;

struct Snapshot {
    SnapshotHeader header;
    std::variant<PhaseGrid, ParticleEnsemble> state;
};

namespace detail {

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class ByteReader {
public:
    ByteReader(const std::vector<char>& b, std::string path) : b_(b), path_(std::move(path)) {}
    std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
    std::uint64_t u64() { return take(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    void raw(char* out, std::size_t n) {
        need(n);
        std::memcpy(out, b_.data() + pos_, n);
        pos_ += n;
    }
    std::size_t remaining() const { return b_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n)
            throw SnapshotError("corrupt snapshot '" + path_ + "': truncated at byte " + std::to_string(b_.size()));
    }
    std::uint64_t take(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    const std::vector<char>& b_;
    std::string path_;
    std::size_t pos_ = 0;
};

inline void write_bytes(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SnapshotError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw SnapshotError("write to '" + path + "' failed");
}

inline void encode_header(ByteWriter& w, const SnapshotHeader& h) {
    w.raw(h.magic.data(), 4);
    w.u32(static_cast<std::uint32_t>(h.solver));
    w.u32(h.d);
    w.u32(0);
    w.u64(h.n0);
    w.u64(h.n1);
    w.f64(h.extent0);
    w.f64(h.extent1);
    w.f64(h.t);
    w.f64(h.sigma);
    w.f64(h.mass);
    w.u64(h.payload_len);
}

}  // namespace detail

inline void write_snapshot(const PhaseGrid& f, double sigma, const std::string& path) {
    SnapshotHeader h;
    h.solver = SolverTag::Grid;
    h.d = 1;
    h.n0 = f.geom.nx;
    h.n1 = f.geom.nv;
    h.extent0 = f.geom.lx;
    h.extent1 = f.geom.lv;
    h.t = f.t;
    h.sigma = sigma;
    h.mass = f.mass();
    h.payload_len = f.values.size();
    detail::ByteWriter w;
    detail::encode_header(w, h);
    for (double v : f.values) w.f64(v);
    detail::write_bytes(path, w.bytes());
}

inline void write_snapshot(const ParticleEnsemble& e, double sigma, const std::string& path) {
    SnapshotHeader h;
    h.solver = SolverTag::Particles;
    h.d = static_cast<std::uint32_t>(e.d);
    h.n0 = e.size();
    h.t = e.t;
    h.sigma = sigma;
    h.mass = e.mass;
    h.payload_len = 2 * e.x.size();
    detail::ByteWriter w;
    detail::encode_header(w, h);
    for (std::size_t i = 0; i < e.size(); ++i) {
        for (std::size_t c = 0; c < e.d; ++c) w.f64(e.x[i * e.d + c]);
        for (std::size_t c = 0; c < e.d; ++c) w.f64(e.v[i * e.d + c]);
    }
    detail::write_bytes(path, w.bytes());
}

inline SnapshotHeader read_snapshot_header(detail::ByteReader& r, const std::string& path) {
    SnapshotHeader h;
    r.raw(h.magic.data(), 4);
    if (h.magic != std::array<char, 4>{'K', 'C', 'S', '1'})
        throw SnapshotError("'" + path + "' is not a KCS1 snapshot (bad magic)");
    const std::uint32_t tag = r.u32();
    if (tag > 1) throw SnapshotError("corrupt snapshot '" + path + "': unknown solver tag " + std::to_string(tag));
    h.solver = static_cast<SolverTag>(tag);
    h.d = r.u32();
    r.u32();
    h.n0 = r.u64();
    h.n1 = r.u64();
    h.extent0 = r.f64();
    h.extent1 = r.f64();
    h.t = r.f64();
    h.sigma = r.f64();
    h.mass = r.f64();
    h.payload_len = r.u64();
    return h;
}

inline std::vector<char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SnapshotError("cannot open snapshot '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline SnapshotHeader read_snapshot_header(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    return read_snapshot_header(r, path);
}

inline Snapshot read_snapshot(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    Snapshot s;
    s.header = read_snapshot_header(r, path);
    const auto& h = s.header;
    auto mismatch = [&](const std::string& what) { return SnapshotError("corrupt snapshot '" + path + "': " + what); };
    if (h.solver == SolverTag::Grid) {
        if (h.d != 1) throw mismatch("grid snapshot with d = " + std::to_string(h.d));
        if (h.payload_len != h.n0 * h.n1) throw mismatch("payload length does not match Nx * Nv");
        if (h.n0 == 0 || h.n1 == 0 || !(h.extent0 > 0.0) || !(h.extent1 > 0.0)) throw mismatch("degenerate geometry");
        if (r.remaining() != 8 * h.payload_len) throw mismatch("payload size does not match header");
        PhaseGrid f(GridGeometry{h.n0, h.n1, h.extent0, h.extent1}, h.t);
        for (double& v : f.values) v = r.f64();
        s.state = std::move(f);
    } else {
        if (h.d < 1 || h.d > kMaxDim) throw mismatch("particle dimension " + std::to_string(h.d));
        if (h.payload_len != 2 * h.d * h.n0) throw mismatch("payload length does not match 2 d N");
        if (r.remaining() != 8 * h.payload_len) throw mismatch("payload size does not match header");
        ParticleEnsemble e(h.d, h.n0, h.mass);
        e.t = h.t;
        for (std::size_t i = 0; i < h.n0; ++i) {
            for (std::size_t c = 0; c < h.d; ++c) e.x[i * h.d + c] = r.f64();
            for (std::size_t c = 0; c < h.d; ++c) e.v[i * h.d + c] = r.f64();
        }
        s.state = std::move(e);
    }
    return s;
}

}  // namespace kcs
