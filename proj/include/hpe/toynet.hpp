#pragma once

// A one-hidden-layer network with three binned angle heads, trained with
// hand-written backpropagation and Adam.
//
// Parameters live in one flat vector, laid out as
//   W1 [hidden x inputs] row-major, b1 [hidden],
//   then for each of yaw, pitch, roll: W [bins x hidden] row-major, b [bins].

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hpe/multiloss.hpp"

namespace hpe {

enum class Activation { tanh, relu };

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ToyNet {
public:
    ToyNet(int inputs, int hidden, const BinSpec& spec, Activation activation = Activation::tanh);

    /// Xavier-uniform weights, zero biases.
    static ToyNet random(int inputs, int hidden, const BinSpec& spec, std::uint64_t seed,
                         Activation activation = Activation::tanh);

    int inputs() const noexcept { return inputs_; }
    int hidden() const noexcept { return hidden_; }
    int bins() const noexcept { return spec_.num_bins; }
    const BinSpec& spec() const noexcept { return spec_; }
    Activation activation() const noexcept { return activation_; }

    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }
    std::size_t param_count() const noexcept { return params_.size(); }

    // Offsets into params(); head k in 0..2 is yaw, pitch, roll.
    std::size_t w1_offset() const noexcept { return 0; }
    std::size_t b1_offset() const noexcept { return static_cast<std::size_t>(hidden_) * inputs_; }
    std::size_t head_w_offset(int k) const noexcept;
    std::size_t head_b_offset(int k) const noexcept;

    bool all_finite() const noexcept;

private:
    int inputs_;
    int hidden_;
    BinSpec spec_;
    Activation activation_;
    std::vector<double> params_;
};

/// Forward pass over a batch (rows are samples). Keeps what backward needs.
struct BatchForward {
    RowMatrix pre_activation;  ///< N x hidden
    RowMatrix hidden;          ///< N x hidden
    std::array<RowMatrix, 3> logits;  ///< N x bins per head
};

BatchForward forward_batch(const ToyNet& net, const Eigen::Ref<const RowMatrix>& inputs);

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits) per head.
void backward_batch(const ToyNet& net, const Eigen::Ref<const RowMatrix>& inputs,
                    const BatchForward& fwd, const std::array<RowMatrix, 3>& dlogits,
                    std::span<double> grads);

AngleHeadOutput toynet_forward(const ToyNet& net, std::span<const double> input);

/// Parameter gradient for one sample, given the gradient of the loss with
/// respect to the logits. Throws ShapeMismatch on inconsistent sizes.
std::vector<double> toynet_backward(const ToyNet& net, std::span<const double> input,
                                    const AngleHeadOutput& logit_grad);

struct AdamState {
    double lr = 1e-3;  ///< toy default; 1e-5 was used for a pretrained ResNet50
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    explicit AdamState(std::size_t n = 0, double learning_rate = 1e-3)
        : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

/// Samples stored row-major, one row of `input_dim` values per target.
struct ToyDataset {
    int input_dim = 0;
    std::vector<double> inputs;
    std::vector<EulerAngles> targets;

    std::size_t size() const noexcept { return targets.size(); }
    std::span<const double> row(std::size_t i) const {
        return {inputs.data() + i * static_cast<std::size_t>(input_dim), static_cast<std::size_t>(input_dim)};
    }
};

/// Rewrites one training input in place before it is fed to the network;
/// called with (sample index, epoch, input row).
using InputTransform = std::function<void(std::size_t, int, std::span<double>)>;

struct TrainConfig {
    BinSpec spec;
    MultiLossConfig loss;
    int epochs = 50;
    int batch_size = 32;
    int hidden = 128;
    double learning_rate = 1e-3;
    double val_fraction = 0.2;
    Activation activation = Activation::tanh;
    std::uint64_t seed = 1;
    InputTransform augment;  ///< optional, training rows only
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;  ///< mean over samples
    double train_mae = 0.0;
    double val_mae = 0.0;
};

struct AngleMae {
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;
    double mean() const noexcept { return (yaw + pitch + roll) / 3.0; }
};

struct TrainResult {
    ToyNet net;
    double initial_val_mae = 0.0;
    std::vector<EpochStats> curve;
};

/// Mean absolute (wrap-aware) error of expectation-decoded predictions.
AngleMae evaluate_mae(const ToyNet& net, const ToyDataset& data);

/// Shuffles once with `seed`, holds out val_fraction (at least one sample)
/// for validation, and trains with mean-over-batch multi-loss. Throws
/// Error on an empty dataset, OutOfRange on any target outside the bins,
/// TrainingDiverged on a non-finite loss.
TrainResult train_toy(const ToyDataset& data, const TrainConfig& config);

/// Versioned text format; see docs/toynet_format.md.
void save_toynet(const ToyNet& net, const std::filesystem::path& path);
ToyNet load_toynet(const std::filesystem::path& path);
std::string format_toynet(const ToyNet& net);
ToyNet parse_toynet(std::string_view text);

}  // namespace hpe
