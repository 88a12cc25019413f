#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace wastetwin::pso {

/// Closed interval [lower, upper] for one search dimension.
struct Interval {
    double lower = 0.0;
    double upper = 1.0;

    double width() const { return upper - lower; }
    bool contains(double x) const { return x >= lower && x <= upper; }
};

/// Swarm hyperparameters. Defaults are the usual constriction-equivalent
/// values (w = 0.729, c1 = c2 = 1.49445).
struct PsoConfig {
    std::size_t swarm_size = 30;
    double inertia_weight = 0.729;
    double cognitive_coeff = 1.49445;
    double social_coeff = 1.49445;
    std::size_t max_iterations = 300;
    std::vector<Interval> bounds;
    double velocity_clamp_fraction = 0.5;
    std::uint64_t seed = 0;
    double tolerance = 1e-10;
    std::size_t stall_iterations = 25;
    // Known-zero-minimum mode: stop once best_value <= tolerance.
    bool stop_at_tolerance = false;

    /// Throws ConfigError if any invariant is violated.
    void validate() const;
    std::size_t dimension() const { return bounds.size(); }
};

struct Particle {
    std::vector<double> position;
    std::vector<double> velocity;
    std::vector<double> personal_best_position;
    double personal_best_value = 0.0;
};

enum class Termination { max_iterations, stall, tolerance };

std::string to_string(Termination t);

struct TracePoint {
    std::size_t iteration = 0;
    double best_value = 0.0;
};

struct OptimizationResult {
    std::vector<double> best_position;
    double best_value = 0.0;
    std::size_t iterations_run = 0;
    std::vector<TracePoint> convergence_trace;
    Termination terminated_by = Termination::max_iterations;
};

using Objective = std::function<double(std::span<const double>)>;

/// Swarm state. A default-constructed swarm is uninitialized and refuses to
/// step; use Swarm::init. Owns a single RNG stream advanced in
/// particle-major, dimension-minor order.
class Swarm {
public:
    Swarm() = default;

    /// `arity`, when nonzero, is the objective's declared input dimension and
    /// must equal the number of bounds.
    static Swarm init(const PsoConfig& config, Objective objective, std::size_t arity = 0);

    /// One velocity/position update for every particle followed by
    /// re-evaluation and best bookkeeping.
    void step();

    bool initialized() const { return initialized_; }
    const PsoConfig& config() const { return config_; }
    const std::vector<Particle>& particles() const { return particles_; }
    const std::vector<double>& global_best_position() const { return global_best_position_; }
    double global_best_value() const { return global_best_value_; }
    std::size_t iteration() const { return iteration_; }

private:
    double evaluate(const std::vector<double>& x) const;

    PsoConfig config_;
    Objective objective_;
    std::mt19937_64 rng_;
    std::vector<Particle> particles_;
    std::vector<double> global_best_position_;
    double global_best_value_ = 0.0;
    std::size_t iteration_ = 0;
    bool initialized_ = false;
};

/// Runs the swarm until max_iterations, stall, or (when enabled) the
/// tolerance target. The trace starts with iteration 0 (the initial swarm).
OptimizationResult optimize(const PsoConfig& config, Objective objective, std::size_t arity = 0);

/// Writes `iteration,best_value` CSV.
void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace);

}  // namespace wastetwin::pso
