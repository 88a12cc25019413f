#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>

#include <json.hpp>

namespace wastetwin::sorting {

enum class WasteClass : std::uint8_t { food_waste, metal, paper, plastic };

inline constexpr std::size_t kClassCount = 4;
inline constexpr std::array<WasteClass, kClassCount> kAllClasses = {
    WasteClass::food_waste, WasteClass::metal, WasteClass::paper, WasteClass::plastic};

std::string to_string(WasteClass c);
std::optional<WasteClass> waste_class_from_string(const std::string& name);

inline std::size_t index(WasteClass c) { return static_cast<std::size_t>(c); }

struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;
};

using Matrix4 = std::array<std::array<double, kClassCount>, kClassCount>;

/// Detector behaviour. confusion[true][predicted] is row-stochastic;
/// confidence[true][predicted] is the Beta distribution of the reported
/// confidence for that cell.
struct ClassifierModel {
    Matrix4 confusion{};
    std::array<std::array<BetaParams, kClassCount>, kClassCount> confidence{};
    double detect_prob = 1.0;
    std::uint64_t seed = 0;

    void validate() const;

    /// `diagonal` on the diagonal, the remainder spread evenly off it;
    /// Beta(8,2) confidence when correct, Beta(2,4) when wrong.
    static ClassifierModel uniform_confusion(double diagonal, double detect_prob = 0.995,
                                             std::uint64_t seed = 0);
};

struct Pixel {
    double u = 0.0;
    double v = 0.0;
};

struct Detection {
    WasteClass true_class = WasteClass::food_waste;
    std::optional<WasteClass> predicted_class;
    double confidence = 0.0;
    Pixel pixel;
    bool accepted = false;
};

/// Sampling state for one stream. Every call consumes the same number of
/// draws whatever the threshold, so raising the threshold on a fixed seed
/// only filters the same sampled detections.
class Classifier {
public:
    explicit Classifier(ClassifierModel model);

    Detection classify(WasteClass true_class, double threshold, Pixel pixel = {});
    const ClassifierModel& model() const { return model_; }

private:
    double sample_beta(const BetaParams& p);

    ClassifierModel model_;
    std::mt19937_64 rng_;
};

/// One-vs-rest counts for a class.
struct ClassCounts {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    /// (TP + TN) / (TP + TN + FP + FN)
    double accuracy() const;
};

struct AccuracyReport {
    double overall = 0.0;  // correct / total
    std::size_t correct = 0;
    std::size_t total = 0;
    std::array<ClassCounts, kClassCount> per_class{};
};

using Outcome = std::pair<WasteClass, WasteClass>;  // (true, predicted)

/// Throws MetricError on empty input.
AccuracyReport accuracy(std::span<const Outcome> outcomes);

nlohmann::json to_json(const ClassifierModel& model);
ClassifierModel classifier_from_json(const nlohmann::json& j, ClassifierModel base = {});
nlohmann::json to_json(const AccuracyReport& report);

}  // namespace wastetwin::sorting
