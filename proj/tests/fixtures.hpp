#pragma once

#include <vector>

// Two reference 10-class logit rows with true label 4 and known softmax
// outputs: the first is still classified correctly despite carrying the
// higher cross-entropy, the second is misclassified with the lower one.
namespace fixtures {

inline const std::vector<double> kLogitsCorrectHighLoss = {
    0.314, -1.267, -0.126, 1.438, 0.264, 1.036, 0.191, -0.118, -0.498, -1.041};
inline const std::vector<double> kLogitsWrongLowLoss = {
    -0.674, -1.434, -0.398, 2.864, -0.488, 3.367, -0.371, -0.613, -1.421, -0.833};

inline constexpr int kTrueLabel = 4;

inline const std::vector<double> kProbsCorrectHighLoss = {
    0.0983, 0.0202, 0.0633, 0.3025, 0.0935, 0.2024, 0.0869, 0.0638, 0.0436, 0.0254};
inline const std::vector<double> kProbsWrongLowLoss = {
    0.0101, 0.0047, 0.0133, 0.3474, 0.0122, 0.5745, 0.0137, 0.0107, 0.0048, 0.0086};

inline constexpr double kCeCorrectHighLoss = 1.196;
inline constexpr double kCeWrongLowLoss = 1.057;
inline constexpr int kPredCorrectHighLoss = 4;
inline constexpr int kPredWrongLowLoss = 6;

} // namespace fixtures
