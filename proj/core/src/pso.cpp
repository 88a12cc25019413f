#include "wastetwin/pso.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "wastetwin/error.hpp"
#include "wastetwin/util.hpp"

namespace wastetwin::pso {

void PsoConfig::validate() const {
    if (swarm_size < 2) throw ConfigError("pso: swarm_size must be >= 2");
    if (max_iterations < 1) throw ConfigError("pso: max_iterations must be >= 1");
    if (bounds.empty()) throw ConfigError("pso: bounds must have at least one dimension");
    for (std::size_t d = 0; d < bounds.size(); ++d) {
        if (!(bounds[d].lower < bounds[d].upper)) {
            throw ConfigError("pso: bounds[" + std::to_string(d) + "] requires lower < upper");
        }
    }
    if (!(inertia_weight >= 0.0) || !(cognitive_coeff >= 0.0) || !(social_coeff >= 0.0)) {
        throw ConfigError("pso: inertia_weight, cognitive_coeff and social_coeff must be >= 0");
    }
    if (!(velocity_clamp_fraction > 0.0 && velocity_clamp_fraction <= 1.0)) {
        throw ConfigError("pso: velocity_clamp_fraction must lie in (0, 1]");
    }
    if (stall_iterations < 1) throw ConfigError("pso: stall_iterations must be >= 1");
    if (!std::isfinite(tolerance)) throw ConfigError("pso: tolerance must be finite");
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::max_iterations: return "max_iterations";
        case Termination::stall: return "stall";
        case Termination::tolerance: return "tolerance";
    }
    return "unknown";
}

double Swarm::evaluate(const std::vector<double>& x) const {
    const double value = objective_(std::span<const double>(x));
    if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "pso: objective returned non-finite value at point (";
        for (std::size_t i = 0; i < x.size(); ++i) msg << (i ? ", " : "") << format_double(x[i]);
        msg << ")";
        throw EvaluationError(msg.str());
    }
    return value;
}

Swarm Swarm::init(const PsoConfig& config, Objective objective, std::size_t arity) {
    config.validate();
    if (!objective) throw ConfigError("pso: objective is empty");
    if (arity != 0 && arity != config.dimension()) {
        throw ConfigError("pso: bounds have " + std::to_string(config.dimension()) +
                          " dimensions but the objective takes " + std::to_string(arity));
    }

    Swarm s;
    s.config_ = config;
    s.objective_ = std::move(objective);
    s.rng_.seed(config.seed);

    const std::size_t dim = config.dimension();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    s.particles_.resize(config.swarm_size);
    for (auto& p : s.particles_) {
        p.position.resize(dim);
        p.velocity.resize(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            const auto& b = config.bounds[d];
            const double vmax = config.velocity_clamp_fraction * b.width();
            p.position[d] = b.lower + unit(s.rng_) * b.width();
            p.velocity[d] = -vmax + 2.0 * vmax * unit(s.rng_);
        }
    }

    // Dimension mismatches surface from the objective on first evaluation;
    // re-raise them as configuration problems.
    for (auto& p : s.particles_) {
        try {
            p.personal_best_value = s.evaluate(p.position);
        } catch (const EvaluationError&) {
            throw;
        } catch (const std::out_of_range& e) {
            throw ConfigError(std::string("pso: objective rejected a ") + std::to_string(dim) +
                              "-dimensional point: " + e.what());
        } catch (const InputError& e) {
            throw ConfigError(std::string("pso: objective rejected a ") + std::to_string(dim) +
                              "-dimensional point: " + e.what());
        }
        p.personal_best_position = p.position;
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < s.particles_.size(); ++i) {
        if (s.particles_[i].personal_best_value < s.particles_[best].personal_best_value) best = i;
    }
    s.global_best_position_ = s.particles_[best].personal_best_position;
    s.global_best_value_ = s.particles_[best].personal_best_value;
    s.initialized_ = true;
    return s;
}

void Swarm::step() {
    if (!initialized_) throw StateError("pso: step called on an uninitialized swarm");

    const std::size_t dim = config_.dimension();
    const double w = config_.inertia_weight;
    const double c1 = config_.cognitive_coeff;
    const double c2 = config_.social_coeff;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Moves use the global best as it stood at the start of the iteration
    // (synchronous update).
    const std::vector<double> gbest = global_best_position_;

    for (auto& p : particles_) {
        for (std::size_t d = 0; d < dim; ++d) {
            const auto& b = config_.bounds[d];
            const double vmax = config_.velocity_clamp_fraction * b.width();
            const double r1 = unit(rng_);
            const double r2 = unit(rng_);
            double v = w * p.velocity[d] + c1 * r1 * (p.personal_best_position[d] - p.position[d]) +
                       c2 * r2 * (gbest[d] - p.position[d]);
            v = std::clamp(v, -vmax, vmax);
            double x = p.position[d] + v;
            if (x < b.lower) {
                x = b.lower;
                v = 0.0;
            } else if (x > b.upper) {
                x = b.upper;
                v = 0.0;
            }
            p.velocity[d] = v;
            p.position[d] = x;
        }
    }

    for (auto& p : particles_) {
        const double value = evaluate(p.position);
        if (value < p.personal_best_value) {
            p.personal_best_value = value;
            p.personal_best_position = p.position;
        }
        if (value < global_best_value_) {
            global_best_value_ = value;
            global_best_position_ = p.position;
        }
    }
    ++iteration_;
}

OptimizationResult optimize(const PsoConfig& config, Objective objective, std::size_t arity) {
    Swarm swarm = Swarm::init(config, std::move(objective), arity);

    OptimizationResult result;
    result.convergence_trace.push_back({0, swarm.global_best_value()});

    const auto reached_target = [&] {
        return config.stop_at_tolerance && swarm.global_best_value() <= config.tolerance;
    };

    std::size_t stalled = 0;
    result.terminated_by = Termination::max_iterations;
    if (reached_target()) {
        result.terminated_by = Termination::tolerance;
    } else {
        while (swarm.iteration() < config.max_iterations) {
            const double before = swarm.global_best_value();
            try {
                swarm.step();
            } catch (const EvaluationError& e) {
                throw EvaluationError("pso: iteration " + std::to_string(swarm.iteration() + 1) +
                                      ": " + e.what());
            }
            const double after = swarm.global_best_value();
            result.convergence_trace.push_back({swarm.iteration(), after});

            if (reached_target()) {
                result.terminated_by = Termination::tolerance;
                break;
            }
            stalled = (before - after < config.tolerance) ? stalled + 1 : 0;
            if (stalled >= config.stall_iterations) {
                result.terminated_by = Termination::stall;
                break;
            }
        }
    }

    result.best_position = swarm.global_best_position();
    result.best_value = swarm.global_best_value();
    result.iterations_run = swarm.iteration();
    return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace) {
    out << "iteration,best_value\n";
    for (const auto& p : trace) out << p.iteration << ',' << format_double(p.best_value) << '\n';
}

}  // namespace wastetwin::pso
