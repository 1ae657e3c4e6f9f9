#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "field.hpp"
#include "grid.hpp"

namespace paracontrol {

/// Reaction term f(t, x, u) of the state equation with its first two
/// u-derivatives. Space-time coefficients are sampled on the nodes, so the
/// evaluators take node indices.
class Nonlinearity {
public:
    enum class Family { zero, linear, monostable, bistable };

    static Nonlinearity zero() { return Nonlinearity(Family::zero, 0.0, {}); }
    static Nonlinearity linear(double a) { return Nonlinearity(Family::linear, a, {}); }
    /// f = u (m - u)
    static Nonlinearity monostable(SpaceTimeField m) { return Nonlinearity(Family::monostable, 0.0, std::move(m)); }
    /// f = u (u - theta) (1 - u)
    static Nonlinearity bistable(SpaceTimeField theta) {
        return Nonlinearity(Family::bistable, 0.0, std::move(theta));
    }

    Family family() const noexcept { return family_; }
    double slope() const noexcept { return a_; }
    const SpaceTimeField& coefficient() const noexcept { return coef_; }

    double f(int m, int j, double u) const {
        switch (family_) {
            case Family::zero: return 0.0;
            case Family::linear: return a_ * u;
            case Family::monostable: return u * (coef_(m, j) - u);
            case Family::bistable: return u * (u - coef_(m, j)) * (1.0 - u);
        }
        return 0.0;
    }

    double du(int m, int j, double u) const {
        switch (family_) {
            case Family::zero: return 0.0;
            case Family::linear: return a_;
            case Family::monostable: return coef_(m, j) - 2.0 * u;
            case Family::bistable: {
                const double th = coef_(m, j);
                return -3.0 * u * u + 2.0 * (1.0 + th) * u - th;
            }
        }
        return 0.0;
    }

    double duu(int m, int j, double u) const {
        switch (family_) {
            case Family::zero: return 0.0;
            case Family::linear: return 0.0;
            case Family::monostable: return -2.0;
            case Family::bistable: return -6.0 * u + 2.0 * (1.0 + coef_(m, j));
        }
        return 0.0;
    }

    void check(const TimeGrid& time, const Grid& grid) const {
        if (family_ == Family::monostable || family_ == Family::bistable) {
            check_shape(coef_, time, grid, "nonlinearity coefficient");
            if (!coef_.all_finite()) throw std::invalid_argument("nonlinearity coefficient is not finite");
        }
        if (family_ == Family::linear && !std::isfinite(a_)) {
            throw std::invalid_argument("linear nonlinearity slope is not finite");
        }
    }

private:
    Nonlinearity(Family family, double a, SpaceTimeField coef) : family_(family), a_(a), coef_(std::move(coef)) {}

    Family family_;
    double a_;
    SpaceTimeField coef_;
};

/// Built-in integrands for the running and terminal costs. None of them
/// depends on (t, x).
class CostTerm {
public:
    enum class Family { zero, linear, quadratic, negsquare };

    CostTerm(Family family = Family::zero) : family_(family) {}

    static CostTerm parse(const std::string& name) {
        if (name == "zero") return {Family::zero};
        if (name == "linear") return {Family::linear};
        if (name == "quadratic") return {Family::quadratic};
        if (name == "negsquare") return {Family::negsquare};
        throw std::invalid_argument("unknown cost family '" + name + "'");
    }

    Family family() const noexcept { return family_; }

    const char* name() const noexcept {
        switch (family_) {
            case Family::zero: return "zero";
            case Family::linear: return "linear";
            case Family::quadratic: return "quadratic";
            case Family::negsquare: return "negsquare";
        }
        return "?";
    }

    double value(double u) const {
        switch (family_) {
            case Family::zero: return 0.0;
            case Family::linear: return u;
            case Family::quadratic: return u * u;
            case Family::negsquare: return -(1.0 - u) * (1.0 - u);
        }
        return 0.0;
    }
    double du(double u) const {
        switch (family_) {
            case Family::zero: return 0.0;
            case Family::linear: return 1.0;
            case Family::quadratic: return 2.0 * u;
            case Family::negsquare: return 2.0 * (1.0 - u);
        }
        return 0.0;
    }
    double duu(double) const {
        switch (family_) {
            case Family::zero: return 0.0;
            case Family::linear: return 0.0;
            case Family::quadratic: return 2.0;
            case Family::negsquare: return -2.0;
        }
        return 0.0;
    }

private:
    Family family_;
};

struct CostSpec {
    CostTerm running;   // j1
    CostTerm terminal;  // j2
};

/// Box and slice-mean constraints: -kappa0 <= y <= kappa1, mean y(t, .) = V0.
struct Constraints {
    double kappa0 = 0.0;
    double kappa1 = 1.0;
    double mean = 0.0;

    double lower() const noexcept { return -kappa0; }
    double upper() const noexcept { return kappa1; }

    void validate() const {
        if (!(kappa0 >= 0.0) || !(kappa1 >= 0.0)) {
            throw std::invalid_argument("constraints: kappa0 and kappa1 must be nonnegative");
        }
        if (!(kappa0 + kappa1 > 0.0)) {
            throw std::invalid_argument("constraints: kappa0 + kappa1 must be positive");
        }
        if (!(mean >= -kappa0 && mean <= kappa1)) {
            throw std::invalid_argument("constraints: infeasible admissible set, need -kappa0 <= V0 <= kappa1 (V0 = " +
                                        std::to_string(mean) + ")");
        }
    }
};

/// A complete control problem instance.
struct Problem {
    Grid grid;
    TimeGrid time;
    Nonlinearity f;
    CostSpec cost;
    std::vector<double> u0;
    Constraints constraints;

    void validate() const {
        f.check(time, grid);
        check_size(u0, grid, "initial datum");
        for (double v : u0) {
            if (!std::isfinite(v)) throw std::invalid_argument("initial datum is not finite");
        }
        constraints.validate();
    }
};

}  // namespace paracontrol
