#pragma once

// Binned classification + expectation regression loss for the three Euler
// angles. Per angle:
//
//   L = CE(softmax(z), bin(target)) + alpha * (E[angle] - target)^2
//   E[angle] = sum_i softmax(z)_i * center_i
//
// with the classification weight fixed at 1. Angles are in degrees, so the
// regression term is in squared degrees.

#include <array>

#include <Eigen/Core>

#include "hpe/rotmath.hpp"

namespace hpe {

/// Equal-width bins over the half-open interval [min_angle, max_angle).
struct BinSpec {
    double min_angle = -99.0;
    double max_angle = 99.0;
    double bin_width = 3.0;
    int num_bins = 66;

    /// Builds and validates; num_bins = (max - min) / width must be an integer >= 2.
    static BinSpec make(double min_angle, double max_angle, double bin_width);

    double center(int bin) const noexcept { return min_angle + (bin + 0.5) * bin_width; }
    Eigen::VectorXd centers() const;
    bool contains(double angle) const noexcept { return angle >= min_angle && angle < max_angle; }
};

struct MultiLossConfig {
    double alpha = 2.0;  ///< regression weight; classification weight is 1
};

/// Logits for yaw, pitch, roll (in that order), num_bins each.
struct AngleHeadOutput {
    std::array<Eigen::VectorXd, 3> logits;
};

struct AngleLoss {
    double cross_entropy = 0.0;
    double squared_error = 0.0;  ///< (E[angle] - target)^2, deg^2
    double expected = 0.0;       ///< decoded angle, deg
    double total = 0.0;          ///< cross_entropy + alpha * squared_error
};

struct MultiLossValue {
    double total = 0.0;
    std::array<AngleLoss, 3> per_angle;
};

/// floor((angle - min) / width). Throws OutOfRange outside [min, max).
int bin_angle(double angle, const BinSpec& spec);

/// Max-subtracted softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// -log p[target] from probabilities.
double cross_entropy(const Eigen::VectorXd& probabilities, int target_bin);

/// log-sum-exp(z) - z[target]; the stable path used by multi_loss.
double cross_entropy_logits(const Eigen::VectorXd& logits, int target_bin);

/// sum_i p_i * center_i.
double expected_angle(const Eigen::VectorXd& probabilities, const BinSpec& spec);

MultiLossValue multi_loss(const AngleHeadOutput& output, const EulerAngles& target,
                          const BinSpec& spec, const MultiLossConfig& config);

/// Exact gradient of multi_loss(...).total with respect to every logit:
/// dL/dz_j = p_j - [j == bin] + 2 alpha (E - t) p_j (c_j - E).
AngleHeadOutput multi_loss_gradient(const AngleHeadOutput& output, const EulerAngles& target,
                                    const BinSpec& spec, const MultiLossConfig& config);

/// Expectation-decoded yaw, pitch, roll.
EulerAngles decode_angles(const AngleHeadOutput& output, const BinSpec& spec);

}  // namespace hpe
