#pragma once

// Binary dump of solver output.
//
//   line 1 : compact JSON header terminated by '\n'
//   rest   : for each named field, (n_T + 1) row-major matrices of
//            little-endian float64, time index k = 0..n_T in order.
//
// The header records the field names, the grid and the byte count, so a
// reader can memory-map or stream the payload without parsing anything else.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "capremu/grid.hpp"

namespace capremu {

class SurfaceIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using NamedStack = std::pair<std::string, const std::vector<Matrix> *>;

struct LoadedSurfaces {
    GridSpec grid;
    nlohmann::json header;
    std::vector<std::pair<std::string, std::vector<Matrix>>> fields;

    const std::vector<Matrix> &field(const std::string &name) const {
        for (const auto &f : fields)
            if (f.first == name) return f.second;
        throw SurfaceIoError("no field '" + name + "' in surface file");
    }
};

namespace detail {

inline void put_f64(std::ostream &out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char *>(b), 8);
}

inline double get_f64(const unsigned char *b) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

inline nlohmann::json grid_json(const GridSpec &g) {
    return {{"xc_min", g.xc_min}, {"xc_max", g.xc_max}, {"xd_min", g.xd_min},
            {"xd_max", g.xd_max}, {"n_c", g.n_c},       {"n_d", g.n_d},
            {"n_T", g.n_T},       {"horizon_T", g.horizon_T}};
}

}  // namespace detail

/// Write every stack in `fields` (each of n_T + 1 matrices on grid `g`).
/// `extra` is merged into the header for provenance (hash, seed, …).
inline void write_surfaces(std::ostream &out, const GridSpec &g,
                           const std::vector<NamedStack> &fields,
                           const nlohmann::json &extra = nlohmann::json::object()) {
    nlohmann::json names = nlohmann::json::array();
    for (const auto &[name, stack] : fields) {
        if (stack->size() != static_cast<std::size_t>(g.n_T + 1))
            throw SurfaceIoError("field '" + name + "' has the wrong number of time slices");
        for (const auto &m : *stack)
            if (m.rows() != g.rows() || m.cols() != g.cols())
                throw SurfaceIoError("field '" + name + "' does not match the grid");
        names.push_back(name);
    }
    const std::size_t per = g.rows() * g.cols() * static_cast<std::size_t>(g.n_T + 1);
    nlohmann::json h = {{"format", "capremu-surfaces"},
                        {"version", 1},
                        {"dtype", "float64-le"},
                        {"layout", "field, time, row (capacity), column (demand)"},
                        {"fields", names},
                        {"grid", detail::grid_json(g)},
                        {"payload_bytes", 8 * per * fields.size()}};
    if (!extra.is_null()) h["meta"] = extra;
    out << h.dump() << "\n";
    for (const auto &[name, stack] : fields)
        for (const auto &m : *stack)
            for (std::size_t k = 0; k < m.rows() * m.cols(); ++k) detail::put_f64(out, m.data()[k]);
    if (!out) throw SurfaceIoError("write failed");
}

inline void write_surfaces_file(const std::string &path, const GridSpec &g,
                                const std::vector<NamedStack> &fields,
                                const nlohmann::json &extra = nlohmann::json::object()) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw SurfaceIoError(path + ": cannot open for writing");
    write_surfaces(f, g, fields, extra);
}

inline LoadedSurfaces read_surfaces(std::istream &in, const std::string &origin) {
    std::string line;
    if (!std::getline(in, line)) throw SurfaceIoError(origin + ": empty surface file");
    LoadedSurfaces out;
    try {
        out.header = nlohmann::json::parse(line);
        if (out.header.at("format") != "capremu-surfaces" || out.header.at("version") != 1)
            throw SurfaceIoError(origin + ": unsupported surface format");
        const auto &gj = out.header.at("grid");
        GridSpec &g = out.grid;
        g.xc_min = gj.at("xc_min");
        g.xc_max = gj.at("xc_max");
        g.xd_min = gj.at("xd_min");
        g.xd_max = gj.at("xd_max");
        g.n_c = gj.at("n_c");
        g.n_d = gj.at("n_d");
        g.n_T = gj.at("n_T");
        g.horizon_T = gj.at("horizon_T");
    } catch (const nlohmann::json::exception &e) {
        throw SurfaceIoError(origin + ": bad header: " + e.what());
    }
    out.grid.validate();
    const std::size_t rows = out.grid.rows(), cols = out.grid.cols();
    std::vector<unsigned char> buf(8 * rows * cols);
    for (const auto &name : out.header.at("fields")) {
        std::vector<Matrix> stack;
        stack.reserve(out.grid.n_T + 1);
        for (int k = 0; k <= out.grid.n_T; ++k) {
            in.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
            if (in.gcount() != static_cast<std::streamsize>(buf.size()))
                throw SurfaceIoError(origin + ": truncated payload");
            Matrix m(rows, cols);
            for (std::size_t q = 0; q < rows * cols; ++q) m.data()[q] = detail::get_f64(&buf[8 * q]);
            stack.push_back(std::move(m));
        }
        out.fields.emplace_back(name.get<std::string>(), std::move(stack));
    }
    return out;
}

inline LoadedSurfaces read_surfaces_file(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw SurfaceIoError(path + ": cannot open surface file");
    return read_surfaces(f, path);
}

}  // namespace capremu
