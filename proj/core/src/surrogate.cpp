#include "wastetwin/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "wastetwin/error.hpp"

namespace wastetwin::surrogate {

std::string to_string(FeatureMap map) {
    return map == FeatureMap::linear ? "linear" : "quadratic_with_interactions";
}

FeatureMap feature_map_from_string(const std::string& name) {
    if (name == "linear") return FeatureMap::linear;
    if (name == "quadratic_with_interactions" || name == "quadratic") {
        return FeatureMap::quadratic_with_interactions;
    }
    throw ConfigError("surrogate: unknown feature_map '" + name + "'");
}

std::size_t expanded_count(FeatureMap map, std::size_t raw) {
    return map == FeatureMap::linear ? raw : raw + raw * (raw + 1) / 2;
}

std::vector<double> expand(FeatureMap map, std::span<const double> x) {
    std::vector<double> out(x.begin(), x.end());
    if (map == FeatureMap::quadratic_with_interactions) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (std::size_t j = i; j < x.size(); ++j) out.push_back(x[i] * x[j]);
        }
    }
    return out;
}

namespace {

std::string feature_name(FeatureMap map, std::size_t raw, std::size_t k) {
    if (k < raw) return "x" + std::to_string(k);
    (void)map;
    std::size_t idx = raw;
    for (std::size_t i = 0; i < raw; ++i) {
        for (std::size_t j = i; j < raw; ++j, ++idx) {
            if (idx == k) return "x" + std::to_string(i) + "*x" + std::to_string(j);
        }
    }
    return "?";
}

// Raw-unit coefficients from a model fitted on z-scored inputs.
std::vector<double> destandardize(FeatureMap map, std::size_t raw, double intercept,
                                  const Eigen::VectorXd& b, const std::vector<double>& mean,
                                  const std::vector<double>& scale) {
    std::vector<double> coef(1 + expanded_count(map, raw), 0.0);
    coef[0] = intercept;
    for (std::size_t i = 0; i < raw; ++i) {
        coef[1 + i] += b[static_cast<Eigen::Index>(i)] / scale[i];
        coef[0] -= b[static_cast<Eigen::Index>(i)] * mean[i] / scale[i];
    }
    if (map == FeatureMap::quadratic_with_interactions) {
        std::size_t k = raw;
        for (std::size_t i = 0; i < raw; ++i) {
            for (std::size_t j = i; j < raw; ++j, ++k) {
                const double c = b[static_cast<Eigen::Index>(k)] / (scale[i] * scale[j]);
                coef[1 + k] += c;
                coef[1 + i] -= c * mean[j];
                coef[1 + j] -= c * mean[i];
                coef[0] += c * mean[i] * mean[j];
            }
        }
    }
    return coef;
}

}  // namespace

void Dataset::add(std::vector<double> x, double y) {
    inputs.push_back(std::move(x));
    targets.push_back(y);
}

RegressionModel::RegressionModel(FeatureMap map, std::size_t raw_features,
                                 std::vector<double> coefficients, double train_r2,
                                 double ridge_floor)
    : map_(map), raw_(raw_features), coefficients_(std::move(coefficients)), train_r2_(train_r2),
      ridge_floor_(ridge_floor) {
    if (coefficients_.size() != expanded_count(map_, raw_) + 1) {
        throw InputError("surrogate: coefficient count " + std::to_string(coefficients_.size()) +
                         " does not match " + to_string(map_) + " over " + std::to_string(raw_) +
                         " inputs");
    }
}

double RegressionModel::predict(std::span<const double> x) const {
    if (x.size() != raw_) {
        throw InputError("surrogate: predict expects " + std::to_string(raw_) + " inputs, got " +
                         std::to_string(x.size()));
    }
    const auto phi = expand(map_, x);
    double y = coefficients_[0];
    for (std::size_t k = 0; k < phi.size(); ++k) y += coefficients_[k + 1] * phi[k];
    return y;
}

RegressionModel fit(const Dataset& data, FeatureMap map) {
    const std::size_t n = data.rows();
    if (data.inputs.size() != n) throw FitError("surrogate: inputs/targets length mismatch");
    const std::size_t raw = data.raw_features();
    if (raw == 0) throw FitError("surrogate: dataset has no features");
    const std::size_t k = expanded_count(map, raw);
    if (n < k + 1) {
        throw FitError("surrogate: underdetermined fit (" + std::to_string(n) + " rows for " +
                       std::to_string(k + 1) + " coefficients)");
    }
    for (std::size_t r = 0; r < n; ++r) {
        if (data.inputs[r].size() != raw) {
            throw FitError("surrogate: row " + std::to_string(r) + " has " +
                           std::to_string(data.inputs[r].size()) + " features, expected " +
                           std::to_string(raw));
        }
        if (!std::isfinite(data.targets[r])) {
            throw FitError("surrogate: non-finite target in row " + std::to_string(r));
        }
        for (double v : data.inputs[r]) {
            if (!std::isfinite(v)) throw FitError("surrogate: non-finite input in row " + std::to_string(r));
        }
    }

    // z-score raw inputs; a zero-variance column keeps scale 1 and is caught
    // below as collinear with the intercept.
    std::vector<double> mean(raw, 0.0), scale(raw, 0.0);
    for (std::size_t i = 0; i < raw; ++i) {
        for (std::size_t r = 0; r < n; ++r) mean[i] += data.inputs[r][i];
        mean[i] /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
            const double d = data.inputs[r][i] - mean[i];
            scale[i] += d * d;
        }
        scale[i] = std::sqrt(scale[i] / static_cast<double>(n));
        if (!(scale[i] > 0.0)) scale[i] = 1.0;
    }

    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd Z(rows, cols);
    Eigen::VectorXd y(rows);
    std::vector<double> z(raw);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < raw; ++i) z[i] = (data.inputs[r][i] - mean[i]) / scale[i];
        const auto phi = expand(map, z);
        for (std::size_t c = 0; c < k; ++c) Z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = phi[c];
        y[static_cast<Eigen::Index>(r)] = data.targets[r];
    }

    // Center the expanded columns (absorbs the intercept) and scale them to
    // unit norm so the ridge floor is relative.
    const Eigen::RowVectorXd col_mean = Z.colwise().mean();
    Z.rowwise() -= col_mean;
    const double y_mean = y.mean();
    const Eigen::VectorXd yc = y.array() - y_mean;
    Eigen::VectorXd col_norm = Z.colwise().norm().transpose();

    std::vector<std::size_t> collinear;
    for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(col_norm[c] > 1e-12 * std::sqrt(static_cast<double>(n)))) {
            collinear.push_back(static_cast<std::size_t>(c));
            col_norm[c] = 1.0;
        }
    }
    Eigen::MatrixXd Zn = Z * col_norm.cwiseInverse().asDiagonal();

    if (collinear.empty()) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Zn);
        qr.setThreshold(std::sqrt(kRidgeFloor));
        if (qr.rank() < cols) {
            const auto perm = qr.colsPermutation().indices();
            for (Eigen::Index c = qr.rank(); c < cols; ++c) {
                collinear.push_back(static_cast<std::size_t>(perm[c]));
            }
        }
    }
    if (!collinear.empty()) {
        std::sort(collinear.begin(), collinear.end());
        std::string names;
        for (std::size_t c : collinear) {
            if (!names.empty()) names += ", ";
            names += std::to_string(c) + " (" + feature_name(map, raw, c) + ")";
        }
        throw FitError("surrogate: rank-deficient design; collinear feature columns: " + names);
    }

    Eigen::MatrixXd gram = Zn.transpose() * Zn;
    gram.diagonal().array() += kRidgeFloor;
    const Eigen::VectorXd bn = gram.ldlt().solve(Zn.transpose() * yc);
    const Eigen::VectorXd b = bn.cwiseQuotient(col_norm);
    const double intercept_z = y_mean - col_mean.dot(b);

    auto coef = destandardize(map, raw, intercept_z, b, mean, scale);

    RegressionModel model(map, raw, std::move(coef), 0.0);
    std::vector<double> pred(n);
    for (std::size_t r = 0; r < n; ++r) pred[r] = model.predict(data.inputs[r]);
    double r2 = 0.0;
    try {
        r2 = r2_score(data.targets, pred);
    } catch (const MetricError& e) {
        throw FitError(std::string("surrogate: ") + e.what());
    }
    return RegressionModel(map, raw, model.coefficients(), r2);
}

double r2_score(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.size() != predicted.size()) {
        throw MetricError("r2_score: length mismatch (" + std::to_string(observed.size()) + " vs " +
                          std::to_string(predicted.size()) + ")");
    }
    if (observed.size() < 2) throw MetricError("r2_score: need at least 2 samples");
    const double mean =
        std::accumulate(observed.begin(), observed.end(), 0.0) / static_cast<double>(observed.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = observed[i] - predicted[i];
        const double d = observed[i] - mean;
        ss_res += e * e;
        ss_tot += d * d;
    }
    if (ss_tot == 0.0) throw MetricError("r2_score: observed values are constant; R^2 undefined");
    return 1.0 - ss_res / ss_tot;
}

nlohmann::json to_json(const RegressionModel& model) {
    return {
        {"feature_map", to_string(model.feature_map())},
        {"raw_features", model.raw_features()},
        {"coefficients", model.coefficients()},
        {"train_r2", model.train_r2()},
        {"ridge_floor", model.ridge_floor()},
    };
}

RegressionModel model_from_json(const nlohmann::json& j) {
    try {
        const auto map = feature_map_from_string(j.at("feature_map").get<std::string>());
        auto coef = j.at("coefficients").get<std::vector<double>>();
        std::size_t raw = 0;
        if (j.contains("raw_features")) {
            raw = j.at("raw_features").get<std::size_t>();
        } else {
            while (expanded_count(map, raw) + 1 < coef.size()) ++raw;
        }
        const double ridge = j.value("ridge_floor", kRidgeFloor);
        return RegressionModel(map, raw, std::move(coef), j.at("train_r2").get<double>(), ridge);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("surrogate: bad model json: ") + e.what());
    }
}

Dataset dataset_from_telemetry(std::span<const telemetry::TelemetryRecord> records,
                               std::span<const telemetry::Channel> inputs,
                               telemetry::Channel target, double bucket_minutes) {
    if (!(bucket_minutes > 0.0)) throw InputError("surrogate: bucket_minutes must be > 0");
    const std::size_t width = inputs.size() + 1;
    struct Acc {
        std::vector<double> sum;
        std::vector<std::size_t> count;
    };
    std::map<long long, Acc> buckets;
    for (const auto& r : records) {
        if (r.quality != telemetry::Quality::ok) continue;
        std::size_t slot = width;
        if (r.channel == target) slot = inputs.size();
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (inputs[i] == r.channel) slot = i;
        }
        if (slot == width) continue;
        auto& acc = buckets[static_cast<long long>(std::floor(r.t_min / bucket_minutes))];
        if (acc.sum.empty()) {
            acc.sum.assign(width, 0.0);
            acc.count.assign(width, 0);
        }
        acc.sum[slot] += r.value;
        ++acc.count[slot];
    }
    Dataset data;
    for (const auto& [key, acc] : buckets) {
        bool complete = true;
        for (std::size_t c : acc.count) complete = complete && c > 0;
        if (!complete) continue;
        std::vector<double> x(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) x[i] = acc.sum[i] / static_cast<double>(acc.count[i]);
        data.add(std::move(x), acc.sum.back() / static_cast<double>(acc.count.back()));
    }
    return data;
}

}  // namespace wastetwin::surrogate
