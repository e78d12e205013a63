#include "hpe/multiloss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hpe/errors.hpp"

namespace hpe {

namespace {

double component(const EulerAngles& e, int k) {
    return k == 0 ? e.yaw : (k == 1 ? e.pitch : e.roll);
}

void check_head(const Eigen::VectorXd& logits, const BinSpec& spec) {
    if (logits.size() != spec.num_bins) {
        throw ShapeMismatch("head has " + std::to_string(logits.size()) + " logits, bin spec has " +
                            std::to_string(spec.num_bins));
    }
}

}  // namespace

BinSpec BinSpec::make(double min_angle, double max_angle, double bin_width) {
    if (!(bin_width > 0) || !(max_angle > min_angle)) {
        throw OutOfRange("bin spec needs max > min and width > 0");
    }
    const double n = (max_angle - min_angle) / bin_width;
    const double rounded = std::round(n);
    if (std::abs(n - rounded) > 1e-9 * std::max(1.0, n) || rounded < 2) {
        throw OutOfRange("bin range must split into an integral number (>= 2) of bins");
    }
    return BinSpec{min_angle, max_angle, bin_width, static_cast<int>(rounded)};
}

Eigen::VectorXd BinSpec::centers() const {
    Eigen::VectorXd c(num_bins);
    for (int i = 0; i < num_bins; ++i) c(i) = center(i);
    return c;
}

int bin_angle(double angle, const BinSpec& spec) {
    if (!spec.contains(angle)) {
        throw OutOfRange("angle " + std::to_string(angle) + " outside [" + std::to_string(spec.min_angle) +
                         ", " + std::to_string(spec.max_angle) + ")");
    }
    const int bin = static_cast<int>(std::floor((angle - spec.min_angle) / spec.bin_width));
    return std::min(bin, spec.num_bins - 1);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
}

double cross_entropy(const Eigen::VectorXd& probabilities, int target_bin) {
    return -std::log(probabilities(target_bin));
}

double cross_entropy_logits(const Eigen::VectorXd& logits, int target_bin) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return lse - logits(target_bin);
}

double expected_angle(const Eigen::VectorXd& probabilities, const BinSpec& spec) {
    double sum = 0.0;
    for (int i = 0; i < spec.num_bins; ++i) sum += probabilities(i) * spec.center(i);
    return sum;
}

MultiLossValue multi_loss(const AngleHeadOutput& output, const EulerAngles& target,
                          const BinSpec& spec, const MultiLossConfig& config) {
    MultiLossValue value;
    for (int k = 0; k < 3; ++k) {
        const auto& z = output.logits[static_cast<std::size_t>(k)];
        check_head(z, spec);
        const double t = component(target, k);
        const int bin = bin_angle(t, spec);
        AngleLoss& a = value.per_angle[static_cast<std::size_t>(k)];
        a.cross_entropy = cross_entropy_logits(z, bin);
        a.expected = expected_angle(softmax(z), spec);
        a.squared_error = (a.expected - t) * (a.expected - t);
        a.total = a.cross_entropy + config.alpha * a.squared_error;
        value.total += a.total;
    }
    return value;
}

AngleHeadOutput multi_loss_gradient(const AngleHeadOutput& output, const EulerAngles& target,
                                    const BinSpec& spec, const MultiLossConfig& config) {
    AngleHeadOutput grad;
    for (int k = 0; k < 3; ++k) {
        const auto& z = output.logits[static_cast<std::size_t>(k)];
        check_head(z, spec);
        const double t = component(target, k);
        const int bin = bin_angle(t, spec);
        const Eigen::VectorXd p = softmax(z);
        const double e = expected_angle(p, spec);
        const double coeff = 2.0 * config.alpha * (e - t);

        Eigen::VectorXd g(spec.num_bins);
        for (int j = 0; j < spec.num_bins; ++j) {
            g(j) = p(j) + coeff * p(j) * (spec.center(j) - e);
        }
        g(bin) -= 1.0;
        grad.logits[static_cast<std::size_t>(k)] = std::move(g);
    }
    return grad;
}

EulerAngles decode_angles(const AngleHeadOutput& output, const BinSpec& spec) {
    EulerAngles e;
    e.yaw = expected_angle(softmax(output.logits[0]), spec);
    e.pitch = expected_angle(softmax(output.logits[1]), spec);
    e.roll = expected_angle(softmax(output.logits[2]), spec);
    return e;
}

}  // namespace hpe
