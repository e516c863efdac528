#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchns/state.hpp"

namespace patchns {
namespace io {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// CSV stream with a fixed header; one value per named column, every
/// number formatted at full precision so runs are byte-reproducible.
class CsvWriter {
  public:
    CsvWriter() = default;
    CsvWriter(const std::string& path, const std::vector<std::string>& columns)
        : out_(path), cols_(columns.size()) {
        if (!out_) throw std::runtime_error("csv: cannot open " + path);
        for (size_t i = 0; i < columns.size(); ++i)
            out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    }

    void row(const std::vector<double>& values) {
        if (values.size() != cols_) throw std::logic_error("csv: column count mismatch");
        for (size_t i = 0; i < values.size(); ++i)
            out_ << fmt(values[i]) << (i + 1 < values.size() ? "," : "\n");
    }

    void flush() { out_.flush(); }

  private:
    std::ofstream out_;
    size_t cols_ = 0;
};

/// Grayscale PGM (portable graymap) of a field, linearly scaled to its
/// own range.
inline void write_pgm(const std::string& path, const ScalarGrid& f) {
    std::ofstream out(path, std::ios::binary);
    double lo = f.min(), hi = f.max();
    double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    out << "P5\n" << f.n() << " " << f.n() << "\n255\n";
    for (int j = f.n() - 1; j >= 0; --j)
        for (int i = 0; i < f.n(); ++i) {
            unsigned char c = static_cast<unsigned char>((f(i, j) - lo) * scale + 0.5);
            out.put(char(c));
        }
}

// ---------------------------------------------------------------------
// Checkpoint: magic string, schema version, JSON header, raw arrays.
// ---------------------------------------------------------------------

inline constexpr char kCheckpointMagic[] = "PNSCKPT1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckptdetail {

inline void put_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t get_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

inline void put_doubles(std::ofstream& out, const double* p, size_t count) {
    out.write(reinterpret_cast<const char*>(p), count * sizeof(double));
}

inline void get_doubles(std::ifstream& in, double* p, size_t count) {
    in.read(reinterpret_cast<char*>(p), count * sizeof(double));
}

}  // namespace ckptdetail

inline void write_checkpoint(const std::string& path, const FluidState& st) {
    using namespace ckptdetail;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
    out.write(kCheckpointMagic, 8);
    std::uint32_t ver = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));

    nlohmann::json header{{"n", st.n()},
                          {"L", st.L()},
                          {"time", st.time},
                          {"particles", st.particles.count()},
                          {"markers", st.curve.size()},
                          {"s_period", st.curve.s_period},
                          {"cell_volume", st.particles.cell_volume},
                          {"dt_prev", st.dt_prev}};
    std::string h = header.dump();
    put_u64(out, h.size());
    out.write(h.data(), std::streamsize(h.size()));

    const size_t g = st.rho.size();
    put_doubles(out, st.u.x.data(), g);
    put_doubles(out, st.u.y.data(), g);
    put_doubles(out, st.rho.data(), g);
    put_doubles(out, st.levelset.phi.data(), g);
    const ParticleCloud& c = st.particles;
    const size_t m = size_t(c.count());
    put_doubles(out, c.label_x.data(), m);
    put_doubles(out, c.label_y.data(), m);
    put_doubles(out, c.pos_x.data(), m);
    put_doubles(out, c.pos_y.data(), m);
    put_doubles(out, c.fval.data(), m);
    put_doubles(out, c.rho.data(), m);
    put_doubles(out, c.jac.data(), m);
    put_doubles(out, c.rho0.data(), m);
    out.write(reinterpret_cast<const char*>(c.side.data()),
              std::streamsize(m * sizeof(std::int8_t)));
    std::vector<double> mx(st.curve.size()), my(st.curve.size());
    for (int i = 0; i < st.curve.size(); ++i) {
        mx[i] = st.curve.pos[i].x;
        my[i] = st.curve.pos[i].y;
    }
    put_doubles(out, mx.data(), mx.size());
    put_doubles(out, my.data(), my.size());
    put_doubles(out, st.curve.s.data(), st.curve.s.size());
}

/// Loads the mesh-visible part of the state (laws are not serialized;
/// the caller re-attaches them from the scenario configuration).
inline FluidState read_checkpoint(const std::string& path,
                                  std::shared_ptr<const ConstitutiveLaws> laws) {
    using namespace ckptdetail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[9] = {0};
    in.read(magic, 8);
    if (std::string(magic) != kCheckpointMagic)
        throw std::runtime_error("checkpoint: bad magic string");
    std::uint32_t ver = 0;
    in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    if (ver != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported schema version " + std::to_string(ver));
    std::uint64_t hlen = get_u64(in);
    std::string htext(hlen, '\0');
    in.read(htext.data(), std::streamsize(hlen));
    nlohmann::json header = nlohmann::json::parse(htext);

    FluidState st;
    st.laws = std::move(laws);
    int n = header.at("n").get<int>();
    double L = header.at("L").get<double>();
    st.time = header.at("time").get<double>();
    st.dt_prev = header.at("dt_prev").get<double>();
    st.u = VectorGrid(n, L);
    st.rho = ScalarGrid(n, L);
    ScalarGrid phi(n, L);
    const size_t g = st.rho.size();
    get_doubles(in, st.u.x.data(), g);
    get_doubles(in, st.u.y.data(), g);
    get_doubles(in, st.rho.data(), g);
    get_doubles(in, phi.data(), g);
    st.levelset = LevelSet(std::move(phi));
    int pc = header.at("particles").get<int>();
    ParticleCloud& c = st.particles;
    c.L = L;
    c.cell_volume = header.at("cell_volume").get<double>();
    c.resize(pc);
    const size_t m = size_t(pc);
    get_doubles(in, c.label_x.data(), m);
    get_doubles(in, c.label_y.data(), m);
    get_doubles(in, c.pos_x.data(), m);
    get_doubles(in, c.pos_y.data(), m);
    get_doubles(in, c.fval.data(), m);
    get_doubles(in, c.rho.data(), m);
    get_doubles(in, c.jac.data(), m);
    get_doubles(in, c.rho0.data(), m);
    in.read(reinterpret_cast<char*>(c.side.data()), std::streamsize(m * sizeof(std::int8_t)));
    int mk = header.at("markers").get<int>();
    st.curve.L = L;
    st.curve.s_period = header.at("s_period").get<double>();
    st.curve.pos.resize(mk);
    st.curve.s.resize(mk);
    std::vector<double> mx(mk), my(mk);
    get_doubles(in, mx.data(), mx.size());
    get_doubles(in, my.data(), my.size());
    get_doubles(in, st.curve.s.data(), st.curve.s.size());
    for (int i = 0; i < mk; ++i) st.curve.pos[i] = {mx[i], my[i]};
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return st;
}

}  // namespace io
}  // namespace patchns
