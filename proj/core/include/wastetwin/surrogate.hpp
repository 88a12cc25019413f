#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wastetwin/telemetry.hpp"

namespace wastetwin::surrogate {

enum class FeatureMap { linear, quadratic_with_interactions };

std::string to_string(FeatureMap map);
FeatureMap feature_map_from_string(const std::string& name);

/// Number of expanded (non-intercept) features for `raw` inputs.
std::size_t expanded_count(FeatureMap map, std::size_t raw);

/// Expanded feature vector: x_1..x_p, then x_i*x_j for i <= j in
/// row-major order (quadratic map only).
std::vector<double> expand(FeatureMap map, std::span<const double> x);

struct Dataset {
    std::vector<std::vector<double>> inputs;
    std::vector<double> targets;

    std::size_t rows() const { return targets.size(); }
    std::size_t raw_features() const { return inputs.empty() ? 0 : inputs.front().size(); }
    void add(std::vector<double> x, double y);
};

/// Diagonal ridge applied to the standardized normal equations.
inline constexpr double kRidgeFloor = 1e-10;

class RegressionModel {
public:
    RegressionModel() = default;
    RegressionModel(FeatureMap map, std::size_t raw_features, std::vector<double> coefficients,
                    double train_r2, double ridge_floor = kRidgeFloor);

    FeatureMap feature_map() const { return map_; }
    std::size_t raw_features() const { return raw_; }
    /// coefficients()[0] is the intercept; the rest follow expand() order.
    const std::vector<double>& coefficients() const { return coefficients_; }
    double intercept() const { return coefficients_.empty() ? 0.0 : coefficients_.front(); }
    double train_r2() const { return train_r2_; }
    double ridge_floor() const { return ridge_floor_; }

    double predict(std::span<const double> x) const;
    double predict(std::initializer_list<double> x) const {
        return predict(std::span<const double>(x.begin(), x.size()));
    }

private:
    FeatureMap map_ = FeatureMap::linear;
    std::size_t raw_ = 0;
    std::vector<double> coefficients_;
    double train_r2_ = 0.0;
    double ridge_floor_ = kRidgeFloor;
};

/// Least-squares fit on z-scored features; coefficients are returned in raw
/// units. Throws FitError when underdetermined or rank deficient.
RegressionModel fit(const Dataset& data, FeatureMap map);

inline double predict(const RegressionModel& model, std::span<const double> x) {
    return model.predict(x);
}

/// 1 - SS_res / SS_tot. Throws MetricError when observed is constant.
double r2_score(std::span<const double> observed, std::span<const double> predicted);

nlohmann::json to_json(const RegressionModel& model);
RegressionModel model_from_json(const nlohmann::json& j);

/// Builds one row per `bucket_minutes` bucket from long-format telemetry:
/// each row holds bucket means of `inputs` channels and the `target`
/// channel. Buckets missing any channel are dropped.
Dataset dataset_from_telemetry(std::span<const telemetry::TelemetryRecord> records,
                               std::span<const telemetry::Channel> inputs,
                               telemetry::Channel target, double bucket_minutes);

}  // namespace wastetwin::surrogate
