#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "capremu/model.hpp"

namespace capremu {

/// Rectangular (capacity × demand) grid with a uniform time step.
struct GridSpec {
    double xc_min = 50.0;
    double xc_max = 210.0;
    double xd_min = 30.0;
    double xd_max = 110.0;
    int n_c = 80;
    int n_d = 40;
    int n_T = 2000;
    double horizon_T = 5.0;

    double dt() const { return horizon_T / n_T; }
    double dx_c() const { return (xc_max - xc_min) / n_c; }
    double dx_d() const { return (xd_max - xd_min) / n_d; }
    double xc(int i) const { return xc_min + i * dx_c(); }
    double xd(int j) const { return xd_min + j * dx_d(); }
    State node(int i, int j) const { return {xc(i), xd(j)}; }
    std::size_t rows() const { return static_cast<std::size_t>(n_c) + 1; }
    std::size_t cols() const { return static_cast<std::size_t>(n_d) + 1; }

    bool contains(State x) const {
        return x.c >= xc_min && x.c <= xc_max && x.d >= xd_min && x.d <= xd_max;
    }

    /// Nearest-lower node after clamping into the grid bounds.
    std::pair<int, int> lower_index(State x) const {
        const double c = std::clamp(x.c, xc_min, xc_max);
        const double d = std::clamp(x.d, xd_min, xd_max);
        int i = static_cast<int>(std::floor((c - xc_min) / dx_c()));
        int j = static_cast<int>(std::floor((d - xd_min) / dx_d()));
        return {std::clamp(i, 0, n_c), std::clamp(j, 0, n_d)};
    }

    std::vector<ParameterError> violations() const {
        std::vector<ParameterError> out;
        if (!(xc_min > 0.0)) out.emplace_back("grid.xc_min", "must be > 0");
        if (!(xd_min > 0.0)) out.emplace_back("grid.xd_min", "must be > 0");
        if (!(xc_max > xc_min)) out.emplace_back("grid.xc_max", "must exceed grid.xc_min");
        if (!(xd_max > xd_min)) out.emplace_back("grid.xd_max", "must exceed grid.xd_min");
        if (n_c < 2) out.emplace_back("grid.n_c", "must be >= 2");
        if (n_d < 2) out.emplace_back("grid.n_d", "must be >= 2");
        if (n_T < 2) out.emplace_back("grid.n_T", "must be >= 2");
        if (!(horizon_T > 0.0)) out.emplace_back("horizon_T", "must be > 0");
        return out;
    }

    void validate() const {
        auto v = violations();
        if (v.empty()) return;
        std::string msg;
        for (const auto &e : v) msg += std::string(e.what()) + "; ";
        throw ParameterError(v.front().key(), msg);
    }
};

/// Dense row-major matrix indexed (capacity i, demand j).
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    explicit Matrix(const GridSpec &g, double fill = 0.0) : Matrix(g.rows(), g.cols(), fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    const std::vector<double> &data() const { return data_; }
    std::vector<double> &data() { return data_; }

    friend bool operator==(const Matrix &, const Matrix &) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// The five difference quotients at every node.
struct Derivatives {
    Matrix d_xc, d_xd, d2_xc, d2_xd, d_xcxd;
};

/// Gradient and Hessian at a single node, with out-of-range neighbours replaced
/// by the nearest boundary value.
inline void fd_at(const Matrix &m, const GridSpec &g, std::size_t i, std::size_t j, Vec2 &grad,
                  Sym2 &hess) {
    const std::size_t nc = g.rows() - 1, nd = g.cols() - 1;
    const std::size_t ip = i < nc ? i + 1 : nc, im = i > 0 ? i - 1 : 0;
    const std::size_t jp = j < nd ? j + 1 : nd, jm = j > 0 ? j - 1 : 0;
    const double dxc = g.dx_c(), dxd = g.dx_d();
    const double c = m(i, j);
    grad.c = (m(ip, j) - m(im, j)) / (2.0 * dxc);
    grad.d = (m(i, jp) - m(i, jm)) / (2.0 * dxd);
    hess.cc = (m(ip, j) + m(im, j) - 2.0 * c) / (dxc * dxc);
    hess.dd = (m(i, jp) + m(i, jm) - 2.0 * c) / (dxd * dxd);
    hess.cd = (m(ip, jp) + m(im, jm) - m(ip, jm) - m(im, jp)) / (4.0 * dxd * dxc);
}

inline Derivatives fd_derivatives(const Matrix &m, const GridSpec &g) {
    if (m.rows() != g.rows() || m.cols() != g.cols())
        throw std::invalid_argument("matrix dimensions do not match the grid");
    Derivatives d{Matrix(g), Matrix(g), Matrix(g), Matrix(g), Matrix(g)};
    Vec2 grad;
    Sym2 hess;
    for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) {
            fd_at(m, g, i, j, grad, hess);
            d.d_xc(i, j) = grad.c;
            d.d_xd(i, j) = grad.d;
            d.d2_xc(i, j) = hess.cc;
            d.d2_xd(i, j) = hess.dd;
            d.d_xcxd(i, j) = hess.cd;
        }
    }
    return d;
}

}  // namespace capremu
