#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "grid.hpp"

namespace paracontrol {

/// Tridiagonal matrix stored by diagonals; lower[0] and upper[n-1] unused.
struct Tridiag {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    explicit Tridiag(int n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

    int size() const noexcept { return static_cast<int>(diag.size()); }

    void multiply(std::span<const double> x, std::span<double> y) const {
        const int n = size();
        for (int j = 0; j < n; ++j) {
            double s = diag[j] * x[j];
            if (j > 0) s += lower[j] * x[j - 1];
            if (j + 1 < n) s += upper[j] * x[j + 1];
            y[j] = s;
        }
    }
};

/// identity + scale * Delta_h, as a tridiagonal matrix.
inline Tridiag shifted_laplacian(const Grid& grid, double scale) {
    const int n = grid.size();
    const double s = scale / (grid.dx() * grid.dx());
    Tridiag a(n);
    for (int j = 0; j < n; ++j) {
        a.lower[j] = j > 0 ? s : 0.0;
        a.upper[j] = j + 1 < n ? s : 0.0;
        a.diag[j] = 1.0 - 2.0 * s;
    }
    if (grid.bc() == Boundary::neumann) {
        a.diag[0] += s;
        a.diag[n - 1] += s;
    }
    return a;
}

/// Thomas algorithm. Returns false on a (near-)zero pivot; x may alias rhs.
inline bool thomas_solve(const Tridiag& a, std::span<const double> rhs, std::span<double> x) {
    const int n = a.size();
    std::vector<double> c(n), d(n);
    double pivot = a.diag[0];
    if (!(std::abs(pivot) > 1e-300)) return false;
    c[0] = a.upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for (int j = 1; j < n; ++j) {
        pivot = a.diag[j] - a.lower[j] * c[j - 1];
        if (!(std::abs(pivot) > 1e-14 * std::abs(a.diag[j])) || !std::isfinite(pivot)) return false;
        c[j] = a.upper[j] / pivot;
        d[j] = (rhs[j] - a.lower[j] * d[j - 1]) / pivot;
    }
    x[n - 1] = d[n - 1];
    for (int j = n - 2; j >= 0; --j) {
        x[j] = d[j] - c[j] * x[j + 1];
    }
    return true;
}

}  // namespace paracontrol
