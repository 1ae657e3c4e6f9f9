#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace paracontrol {

enum class Boundary { dirichlet, neumann };

inline const char* to_string(Boundary bc) {
    return bc == Boundary::dirichlet ? "dirichlet" : "neumann";
}

/// Uniform 1D discretization of (0, L).
///
/// Dirichlet: the n-1 interior nodes x_j = (j+1) dx.
/// Neumann:   the n cell centers x_j = (j+1/2) dx.
/// Every dof carries the quadrature weight dx, so the weights sum to L for
/// Neumann and to L - dx for Dirichlet.
class Grid {
public:
    static Grid build(double length, int cells, Boundary bc) {
        if (!(length > 0.0) || !std::isfinite(length)) {
            throw std::invalid_argument("grid length must be positive, got " + std::to_string(length));
        }
        if (cells < 4) {
            throw std::invalid_argument("grid needs at least 4 cells, got " + std::to_string(cells));
        }
        Grid g;
        g.length_ = length;
        g.cells_ = cells;
        g.bc_ = bc;
        g.dx_ = length / cells;
        const int ndof = bc == Boundary::dirichlet ? cells - 1 : cells;
        g.positions_.resize(ndof);
        for (int j = 0; j < ndof; ++j) {
            g.positions_[j] = bc == Boundary::dirichlet ? (j + 1) * g.dx_ : (j + 0.5) * g.dx_;
        }
        g.weights_.assign(ndof, g.dx_);
        return g;
    }

    double length() const noexcept { return length_; }
    int cells() const noexcept { return cells_; }
    Boundary bc() const noexcept { return bc_; }
    double dx() const noexcept { return dx_; }
    int size() const noexcept { return static_cast<int>(positions_.size()); }
    std::span<const double> positions() const noexcept { return positions_; }
    std::span<const double> weights() const noexcept { return weights_; }

    /// Sum of the quadrature weights (the measure of the discrete domain).
    double total_weight() const noexcept { return dx_ * size(); }

    bool operator==(const Grid& other) const {
        return length_ == other.length_ && cells_ == other.cells_ && bc_ == other.bc_;
    }

private:
    Grid() = default;

    double length_ = 0.0;
    int cells_ = 0;
    Boundary bc_ = Boundary::neumann;
    double dx_ = 0.0;
    std::vector<double> positions_;
    std::vector<double> weights_;
};

inline void check_size(std::span<const double> f, const Grid& grid, const char* what) {
    if (static_cast<int>(f.size()) != grid.size()) {
        throw std::invalid_argument(std::string(what) + ": field has " + std::to_string(f.size()) +
                                    " values, grid has " + std::to_string(grid.size()) + " dofs");
    }
}

/// Quadrature sum of w_j f_j.
inline double integrate(std::span<const double> f, const Grid& grid) {
    check_size(f, grid, "integrate");
    const auto w = grid.weights();
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        s += w[j] * f[j];
    }
    return s;
}

/// Weighted mean over the discrete domain.
inline double mean(std::span<const double> f, const Grid& grid) {
    return integrate(f, grid) / grid.total_weight();
}

inline double inner(std::span<const double> a, std::span<const double> b, const Grid& grid) {
    check_size(a, grid, "inner");
    check_size(b, grid, "inner");
    const auto w = grid.weights();
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        s += w[j] * a[j] * b[j];
    }
    return s;
}

inline double l2_norm(std::span<const double> a, const Grid& grid) {
    return std::sqrt(inner(a, a, grid));
}

/// out = Delta_h in. Three-point stencil; zero ghost values for Dirichlet,
/// mirrored ghost cells for Neumann.
inline void apply_laplacian(const Grid& grid, std::span<const double> in, std::span<double> out) {
    const int n = grid.size();
    const double s = 1.0 / (grid.dx() * grid.dx());
    const bool neumann = grid.bc() == Boundary::neumann;
    for (int j = 0; j < n; ++j) {
        const double left = j > 0 ? in[j - 1] : (neumann ? in[j] : 0.0);
        const double right = j + 1 < n ? in[j + 1] : (neumann ? in[j] : 0.0);
        out[j] = s * (left - 2.0 * in[j] + right);
    }
}

/// One eigenpair of -Delta_h, normalized in the discrete L2 product.
struct Mode {
    int index = 0;
    double lambda_discrete = 0.0;
    double lambda_continuum = 0.0;
    std::vector<double> vector;
};

/// Eigenpairs of the discrete Laplacian, in nondecreasing eigenvalue order.
struct SpectralBasis {
    Boundary bc = Boundary::neumann;
    std::vector<Mode> modes;

    int size() const noexcept { return static_cast<int>(modes.size()); }
    const Mode& mode(int k) const { return modes.at(k - 1); }
};

/// Closed-form eigenbasis of -Delta_h. Modes are indexed from k = 1; for
/// Neumann the first mode is the constant with eigenvalue zero.
inline SpectralBasis discrete_eigenbasis(const Grid& grid, int count) {
    if (count < 1 || count > grid.size()) {
        throw std::invalid_argument("eigenbasis: requested " + std::to_string(count) +
                                    " modes, grid has " + std::to_string(grid.size()) + " dofs");
    }
    const int n = grid.cells();
    const double dx = grid.dx();
    const double pi = std::numbers::pi;
    SpectralBasis basis;
    basis.bc = grid.bc();
    basis.modes.reserve(count);
    for (int k = 1; k <= count; ++k) {
        Mode m;
        m.index = k;
        m.vector.resize(grid.size());
        // frequency number: k for Dirichlet, k-1 for Neumann
        const int freq = grid.bc() == Boundary::dirichlet ? k : k - 1;
        const double s = std::sin(freq * pi / (2.0 * n));
        m.lambda_discrete = 4.0 / (dx * dx) * s * s;
        m.lambda_continuum = std::pow(freq * pi / grid.length(), 2);
        for (int j = 0; j < grid.size(); ++j) {
            m.vector[j] = grid.bc() == Boundary::dirichlet
                              ? std::sin(freq * pi * (j + 1) / n)
                              : std::cos(freq * pi * (j + 0.5) / n);
        }
        const double norm = l2_norm(m.vector, grid);
        for (double& v : m.vector) {
            v /= norm;
        }
        basis.modes.push_back(std::move(m));
    }
    return basis;
}

struct Interval {
    double a = 0.0;
    double b = 0.0;
};

/// A subset of dofs playing the role of a spatial region.
struct RegionMask {
    std::vector<char> flags;
    double measure = 0.0;

    bool contains(int j) const { return flags[j] != 0; }
    int count() const { return static_cast<int>(std::count(flags.begin(), flags.end(), 1)); }
};

inline RegionMask region_mask(const Grid& grid, std::span<const Interval> intervals) {
    for (const auto& iv : intervals) {
        if (iv.a > iv.b || iv.a < 0.0 || iv.b > grid.length()) {
            throw std::invalid_argument("region interval [" + std::to_string(iv.a) + ", " +
                                        std::to_string(iv.b) + "] is not inside [0, L]");
        }
    }
    RegionMask mask;
    mask.flags.assign(grid.size(), 0);
    const auto x = grid.positions();
    const auto w = grid.weights();
    for (int j = 0; j < grid.size(); ++j) {
        for (const auto& iv : intervals) {
            if (x[j] >= iv.a && x[j] <= iv.b) {
                mask.flags[j] = 1;
                mask.measure += w[j];
                break;
            }
        }
    }
    return mask;
}

}  // namespace paracontrol
