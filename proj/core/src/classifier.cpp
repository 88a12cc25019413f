#include "wastetwin/classifier.hpp"

#include <cmath>

#include "wastetwin/error.hpp"

namespace wastetwin::sorting {

std::string to_string(WasteClass c) {
    switch (c) {
        case WasteClass::food_waste: return "food_waste";
        case WasteClass::metal: return "metal";
        case WasteClass::paper: return "paper";
        case WasteClass::plastic: return "plastic";
    }
    return "unknown";
}

std::optional<WasteClass> waste_class_from_string(const std::string& name) {
    for (auto c : kAllClasses) {
        if (to_string(c) == name) return c;
    }
    return std::nullopt;
}

void ClassifierModel::validate() const {
    for (std::size_t i = 0; i < kClassCount; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < kClassCount; ++j) {
            const double p = confusion[i][j];
            if (!(p >= 0.0) || !std::isfinite(p)) {
                throw ConfigError("classifier: confusion entries must be finite and >= 0");
            }
            sum += p;
            const auto& b = confidence[i][j];
            if (!(b.alpha > 0.0 && b.beta > 0.0)) {
                throw ConfigError("classifier: confidence Beta parameters must be > 0");
            }
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw ConfigError("classifier: confusion row '" + to_string(kAllClasses[i]) +
                              "' does not sum to 1");
        }
    }
    if (!(detect_prob >= 0.0 && detect_prob <= 1.0)) {
        throw ConfigError("classifier: detect_prob must be in [0, 1]");
    }
}

ClassifierModel ClassifierModel::uniform_confusion(double diagonal, double detect_prob,
                                                   std::uint64_t seed) {
    ClassifierModel m;
    const double off = (1.0 - diagonal) / static_cast<double>(kClassCount - 1);
    for (std::size_t i = 0; i < kClassCount; ++i) {
        for (std::size_t j = 0; j < kClassCount; ++j) {
            m.confusion[i][j] = i == j ? diagonal : off;
            m.confidence[i][j] = i == j ? BetaParams{8.0, 2.0} : BetaParams{2.0, 4.0};
        }
    }
    m.detect_prob = detect_prob;
    m.seed = seed;
    return m;
}

Classifier::Classifier(ClassifierModel model) : model_(std::move(model)), rng_(model_.seed) {
    model_.validate();
}

double Classifier::sample_beta(const BetaParams& p) {
    std::gamma_distribution<double> ga(p.alpha, 1.0);
    std::gamma_distribution<double> gb(p.beta, 1.0);
    const double x = ga(rng_);
    const double y = gb(rng_);
    return x / (x + y);
}

Detection Classifier::classify(WasteClass true_class, double threshold, Pixel pixel) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw InputError("classify: threshold must be in [0, 1]");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Detection d;
    d.true_class = true_class;
    d.pixel = pixel;
    if (unit(rng_) >= model_.detect_prob) return d;

    const auto& row = model_.confusion[index(true_class)];
    const double u = unit(rng_);
    double acc = 0.0;
    std::size_t pick = kClassCount - 1;
    for (std::size_t j = 0; j < kClassCount; ++j) {
        acc += row[j];
        if (u < acc) {
            pick = j;
            break;
        }
    }
    // Guard against rounding in the cumulative sum landing on a zero cell.
    while (row[pick] == 0.0 && pick > 0) --pick;

    d.predicted_class = kAllClasses[pick];
    d.confidence = sample_beta(model_.confidence[index(true_class)][pick]);
    d.accepted = d.confidence >= threshold;
    return d;
}

double ClassCounts::accuracy() const {
    const auto n = tp + tn + fp + fn;
    if (n == 0) throw MetricError("accuracy: no outcomes");
    return static_cast<double>(tp + tn) / static_cast<double>(n);
}

AccuracyReport accuracy(std::span<const Outcome> outcomes) {
    if (outcomes.empty()) throw MetricError("accuracy: no outcomes");
    AccuracyReport r;
    r.total = outcomes.size();
    for (const auto& [truth, predicted] : outcomes) {
        if (truth == predicted) ++r.correct;
        for (auto c : kAllClasses) {
            auto& k = r.per_class[index(c)];
            const bool is_true = truth == c;
            const bool is_pred = predicted == c;
            if (is_true && is_pred) ++k.tp;
            else if (is_true) ++k.fn;
            else if (is_pred) ++k.fp;
            else ++k.tn;
        }
    }
    r.overall = static_cast<double>(r.correct) / static_cast<double>(r.total);
    return r;
}

nlohmann::json to_json(const ClassifierModel& m) {
    nlohmann::json confusion = nlohmann::json::array();
    nlohmann::json confidence = nlohmann::json::array();
    for (std::size_t i = 0; i < kClassCount; ++i) {
        nlohmann::json row = nlohmann::json::array();
        nlohmann::json crow = nlohmann::json::array();
        for (std::size_t j = 0; j < kClassCount; ++j) {
            row.push_back(m.confusion[i][j]);
            crow.push_back({m.confidence[i][j].alpha, m.confidence[i][j].beta});
        }
        confusion.push_back(row);
        confidence.push_back(crow);
    }
    return {{"confusion", confusion},
            {"confidence_beta", confidence},
            {"detect_prob", m.detect_prob},
            {"seed", m.seed}};
}

ClassifierModel classifier_from_json(const nlohmann::json& j, ClassifierModel base) {
    try {
        if (j.contains("diagonal")) {
            base = ClassifierModel::uniform_confusion(j.at("diagonal").get<double>(), base.detect_prob,
                                                      base.seed);
        }
        if (j.contains("confusion")) {
            const auto& c = j.at("confusion");
            if (!c.is_array() || c.size() != kClassCount) {
                throw ConfigError("classifier: confusion must be a 4x4 array");
            }
            for (std::size_t i = 0; i < kClassCount; ++i) {
                if (!c[i].is_array() || c[i].size() != kClassCount) {
                    throw ConfigError("classifier: confusion must be a 4x4 array");
                }
                for (std::size_t k = 0; k < kClassCount; ++k) base.confusion[i][k] = c[i][k].get<double>();
            }
        }
        if (j.contains("confidence_beta")) {
            const auto& c = j.at("confidence_beta");
            if (c.is_object()) {
                const auto correct = c.at("correct").get<std::array<double, 2>>();
                const auto wrong = c.at("wrong").get<std::array<double, 2>>();
                for (std::size_t i = 0; i < kClassCount; ++i) {
                    for (std::size_t k = 0; k < kClassCount; ++k) {
                        const auto& ab = i == k ? correct : wrong;
                        base.confidence[i][k] = {ab[0], ab[1]};
                    }
                }
            } else {
                if (!c.is_array() || c.size() != kClassCount) {
                    throw ConfigError("classifier: confidence_beta must be 4x4 [alpha, beta] pairs");
                }
                for (std::size_t i = 0; i < kClassCount; ++i) {
                    for (std::size_t k = 0; k < kClassCount; ++k) {
                        const auto ab = c.at(i).at(k).get<std::array<double, 2>>();
                        base.confidence[i][k] = {ab[0], ab[1]};
                    }
                }
            }
        }
        if (j.contains("detect_prob")) base.detect_prob = j.at("detect_prob").get<double>();
        if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("classifier: ") + e.what());
    }
    base.validate();
    return base;
}

nlohmann::json to_json(const AccuracyReport& r) {
    nlohmann::json per_class = nlohmann::json::object();
    for (auto c : kAllClasses) {
        const auto& k = r.per_class[index(c)];
        per_class[to_string(c)] = {{"tp", k.tp}, {"tn", k.tn}, {"fp", k.fp}, {"fn", k.fn},
                                   {"accuracy", k.accuracy()}};
    }
    return {{"overall", r.overall}, {"correct", r.correct}, {"total", r.total}, {"per_class", per_class}};
}

}  // namespace wastetwin::sorting
