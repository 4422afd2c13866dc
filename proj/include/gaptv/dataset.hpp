#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaptv {

enum class LossKind { gaussian, binomial };

inline const char* to_string(LossKind k) {
    return k == LossKind::gaussian ? "gaussian" : "binomial";
}

inline LossKind loss_from_string(const std::string& s) {
    if (s == "gaussian") return LossKind::gaussian;
    if (s == "binomial") return LossKind::binomial;
    throw std::invalid_argument("unknown loss kind: " + s);
}

struct DataPoint {
    double x1 = 0.0;
    double x2 = 0.0;
    double y = 0.0;
};

/// Point-referenced observations plus the observation model used to fit them.
/// Binomial datasets carry binary labels in y.
struct Dataset {
    std::vector<DataPoint> points;
    LossKind loss = LossKind::gaussian;

    std::size_t size() const { return points.size(); }

    void validate() const {
        if (points.empty()) throw std::invalid_argument("dataset: no points");
        for (std::size_t i = 0; i < points.size(); ++i) {
            const DataPoint& p = points[i];
            if (!std::isfinite(p.x1) || !std::isfinite(p.x2) ||
                !std::isfinite(p.y)) {
                throw std::invalid_argument(
                    "dataset: non-finite value at point " + std::to_string(i));
            }
            if (loss == LossKind::binomial && p.y != 0.0 && p.y != 1.0) {
                throw std::invalid_argument(
                    "dataset: binomial label not in {0,1} at point " +
                    std::to_string(i));
            }
        }
    }
};

}  // namespace gaptv
