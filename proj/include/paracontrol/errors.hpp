#pragma once

#include <stdexcept>
#include <string>

namespace paracontrol {

/// A time step of one of the parabolic solvers could not be completed
/// (singular step matrix, Newton stall). Carries the index of the target node.
class StepFailure : public std::runtime_error {
public:
    StepFailure(const std::string& what, int time_index)
        : std::runtime_error(what + " (time index " + std::to_string(time_index) + ")"),
          time_index_(time_index) {}

    int time_index() const noexcept { return time_index_; }

private:
    int time_index_;
};

/// The state left the blow-up guard ball.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int time_index)
        : std::runtime_error(what + " (time index " + std::to_string(time_index) + ")"),
          time_index_(time_index) {}

    int time_index() const noexcept { return time_index_; }

private:
    int time_index_;
};

/// No admissible oscillating datum exists for the requested support and modes.
class InfeasibleConstruction : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The time window of a Dirac approximant meets an empty slice of the support.
class DegenerateWindow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace paracontrol
