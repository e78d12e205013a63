#include "hpe/toynet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hpe/errors.hpp"
#include "hpe/random.hpp"

namespace hpe {

namespace {

using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;
using MutVecMap = Eigen::Map<Eigen::RowVectorXd>;

constexpr std::string_view kMagic = "hpe-toynet";
constexpr int kFormatVersion = 1;

const char* activation_name(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

void check_grads(const ToyNet& net, std::span<const double> grads) {
    if (grads.size() != net.param_count()) {
        throw ShapeMismatch("gradient buffer has " + std::to_string(grads.size()) + " entries, net has " +
                            std::to_string(net.param_count()));
    }
}

AngleHeadOutput row_output(const BatchForward& fwd, Eigen::Index i) {
    AngleHeadOutput out;
    for (std::size_t k = 0; k < 3; ++k) out.logits[k] = fwd.logits[k].row(i).transpose();
    return out;
}

}  // namespace

ToyNet::ToyNet(int inputs, int hidden, const BinSpec& spec, Activation activation)
    : inputs_(inputs), hidden_(hidden), spec_(spec), activation_(activation) {
    if (inputs < 1 || hidden < 1 || spec.num_bins < 2) {
        throw ShapeMismatch("toy net needs inputs >= 1, hidden >= 1, bins >= 2");
    }
    const auto h = static_cast<std::size_t>(hidden);
    const auto b = static_cast<std::size_t>(spec.num_bins);
    params_.assign(h * static_cast<std::size_t>(inputs) + h + 3 * (b * h + b), 0.0);
}

ToyNet ToyNet::random(int inputs, int hidden, const BinSpec& spec, std::uint64_t seed, Activation activation) {
    ToyNet net(inputs, hidden, spec, activation);
    Rng rng = make_rng(seed, 0x1e7);
    auto fill = [&](std::size_t offset, std::size_t count, double fan_in, double fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < count; ++i) net.params_[offset + i] = uniform(rng, -limit, limit);
    };
    fill(net.w1_offset(), static_cast<std::size_t>(hidden) * inputs, inputs, hidden);
    for (int k = 0; k < 3; ++k) {
        fill(net.head_w_offset(k), static_cast<std::size_t>(spec.num_bins) * hidden, hidden, spec.num_bins);
    }
    return net;
}

std::size_t ToyNet::head_w_offset(int k) const noexcept {
    const auto h = static_cast<std::size_t>(hidden_);
    const auto b = static_cast<std::size_t>(spec_.num_bins);
    return b1_offset() + h + static_cast<std::size_t>(k) * (b * h + b);
}

std::size_t ToyNet::head_b_offset(int k) const noexcept {
    return head_w_offset(k) + static_cast<std::size_t>(spec_.num_bins) * static_cast<std::size_t>(hidden_);
}

bool ToyNet::all_finite() const noexcept {
    return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

BatchForward forward_batch(const ToyNet& net, const Eigen::Ref<const RowMatrix>& inputs) {
    if (inputs.cols() != net.inputs()) {
        throw ShapeMismatch("input has " + std::to_string(inputs.cols()) + " columns, net expects " +
                            std::to_string(net.inputs()));
    }
    const double* p = net.params().data();
    const int h = net.hidden(), b = net.bins();
    const ConstMap w1(p + net.w1_offset(), h, net.inputs());
    const ConstVecMap b1(p + net.b1_offset(), h);

    BatchForward fwd;
    fwd.pre_activation = inputs * w1.transpose();
    fwd.pre_activation.rowwise() += b1;
    if (net.activation() == Activation::tanh) {
        fwd.hidden = fwd.pre_activation.array().tanh();
    } else {
        fwd.hidden = fwd.pre_activation.cwiseMax(0.0);
    }
    for (int k = 0; k < 3; ++k) {
        const ConstMap w(p + net.head_w_offset(k), b, h);
        const ConstVecMap bias(p + net.head_b_offset(k), b);
        auto& z = fwd.logits[static_cast<std::size_t>(k)];
        z = fwd.hidden * w.transpose();
        z.rowwise() += bias;
    }
    return fwd;
}

void backward_batch(const ToyNet& net, const Eigen::Ref<const RowMatrix>& inputs, const BatchForward& fwd,
                    const std::array<RowMatrix, 3>& dlogits, std::span<double> grads) {
    check_grads(net, grads);
    const double* p = net.params().data();
    double* g = grads.data();
    const int h = net.hidden(), b = net.bins();
    const Eigen::Index n = inputs.rows();

    RowMatrix dhidden = RowMatrix::Zero(n, h);
    for (int k = 0; k < 3; ++k) {
        const auto& dz = dlogits[static_cast<std::size_t>(k)];
        if (dz.rows() != n || dz.cols() != b) throw ShapeMismatch("logit gradient shape mismatch");
        const ConstMap w(p + net.head_w_offset(k), b, h);
        MutMap(g + net.head_w_offset(k), b, h).noalias() += dz.transpose() * fwd.hidden;
        MutVecMap(g + net.head_b_offset(k), b) += dz.colwise().sum();
        dhidden.noalias() += dz * w;
    }

    RowMatrix dpre;
    if (net.activation() == Activation::tanh) {
        dpre = dhidden.array() * (1.0 - fwd.hidden.array().square());
    } else {
        dpre = dhidden.array() * (fwd.pre_activation.array() > 0.0).cast<double>();
    }
    MutMap(g + net.w1_offset(), h, net.inputs()).noalias() += dpre.transpose() * inputs;
    MutVecMap(g + net.b1_offset(), h) += dpre.colwise().sum();
}

AngleHeadOutput toynet_forward(const ToyNet& net, std::span<const double> input) {
    if (input.size() != static_cast<std::size_t>(net.inputs())) throw ShapeMismatch("input length mismatch");
    const ConstMap x(input.data(), 1, net.inputs());
    return row_output(forward_batch(net, x), 0);
}

std::vector<double> toynet_backward(const ToyNet& net, std::span<const double> input,
                                    const AngleHeadOutput& logit_grad) {
    if (input.size() != static_cast<std::size_t>(net.inputs())) throw ShapeMismatch("input length mismatch");
    const ConstMap x(input.data(), 1, net.inputs());
    const BatchForward fwd = forward_batch(net, x);
    std::array<RowMatrix, 3> dz;
    for (std::size_t k = 0; k < 3; ++k) {
        if (logit_grad.logits[k].size() != net.bins()) throw ShapeMismatch("logit gradient length mismatch");
        dz[k] = logit_grad.logits[k].transpose();
    }
    std::vector<double> grads(net.param_count(), 0.0);
    backward_batch(net, x, fwd, dz, grads);
    return grads;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
    if (grads.size() != params.size() || s.m.size() != params.size() || s.v.size() != params.size()) {
        throw ShapeMismatch("adam: parameter, gradient and moment sizes differ");
    }
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
        const double m_hat = s.m[i] / c1;
        const double v_hat = s.v[i] / c2;
        params[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}

AngleMae evaluate_mae(const ToyNet& net, const ToyDataset& data) {
    if (data.input_dim != net.inputs()) throw ShapeMismatch("dataset/net input size mismatch");
    AngleMae mae;
    if (data.size() == 0) return mae;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < data.size(); start += kChunk) {
        const std::size_t count = std::min(kChunk, data.size() - start);
        const ConstMap x(data.inputs.data() + start * static_cast<std::size_t>(data.input_dim),
                         static_cast<Eigen::Index>(count), data.input_dim);
        const BatchForward fwd = forward_batch(net, x);
        for (std::size_t i = 0; i < count; ++i) {
            const EulerAngles pred = decode_angles(row_output(fwd, static_cast<Eigen::Index>(i)), net.spec());
            const EulerAngles& t = data.targets[start + i];
            mae.yaw += angle_error(pred.yaw, t.yaw);
            mae.pitch += angle_error(pred.pitch, t.pitch);
            mae.roll += angle_error(pred.roll, t.roll);
        }
    }
    const double n = static_cast<double>(data.size());
    mae.yaw /= n;
    mae.pitch /= n;
    mae.roll /= n;
    return mae;
}

TrainResult train_toy(const ToyDataset& data, const TrainConfig& config) {
    if (data.size() == 0) throw Error("train_toy: empty dataset");
    if (data.input_dim < 1 || data.inputs.size() != data.size() * static_cast<std::size_t>(data.input_dim)) {
        throw ShapeMismatch("train_toy: inputs do not match input_dim x samples");
    }
    if (config.epochs < 0 || config.batch_size < 1) throw OutOfRange("train_toy: epochs >= 0, batch_size >= 1");
    if (!(config.loss.alpha >= 0.0)) throw OutOfRange("train_toy: alpha must be >= 0");
    for (const auto& t : data.targets) {
        bin_angle(t.yaw, config.spec);
        bin_angle(t.pitch, config.spec);
        bin_angle(t.roll, config.spec);
    }

    const std::size_t n = data.size();
    const auto dim = static_cast<std::size_t>(data.input_dim);
    Rng rng = make_rng(config.seed, 0x7a1);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle = [&](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
            std::swap(v[i - 1], v[j]);
        }
    };
    shuffle(order);

    std::size_t n_val = 0;
    if (n > 1) {
        n_val = static_cast<std::size_t>(std::llround(config.val_fraction * static_cast<double>(n)));
        n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    }
    auto gather = [&](std::size_t from, std::size_t to) {
        ToyDataset out;
        out.input_dim = data.input_dim;
        for (std::size_t i = from; i < to; ++i) {
            const auto r = data.row(order[i]);
            out.inputs.insert(out.inputs.end(), r.begin(), r.end());
            out.targets.push_back(data.targets[order[i]]);
        }
        return out;
    };
    const ToyDataset train = gather(n_val, n);
    const ToyDataset val = n_val > 0 ? gather(0, n_val) : train;
    // Training-set positions map back to the caller's sample index for the augment hook.
    std::vector<std::size_t> source_index(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

    TrainResult result{ToyNet::random(data.input_dim, config.hidden, config.spec, mix_seed(config.seed, 1),
                                      config.activation),
                       0.0,
                       {}};
    ToyNet& net = result.net;
    result.initial_val_mae = evaluate_mae(net, val).mean();

    AdamState adam(net.param_count(), config.learning_rate);
    std::vector<double> grads(net.param_count());
    std::vector<std::size_t> batch_order(train.size());
    std::iota(batch_order.begin(), batch_order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(batch_order);
        double loss_sum = 0.0;
        AngleMae running;
        for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t count = std::min<std::size_t>(config.batch_size, train.size() - start);
            RowMatrix x(static_cast<Eigen::Index>(count), data.input_dim);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t s = batch_order[start + i];
                const auto r = train.row(s);
                std::span<double> dst(x.row(static_cast<Eigen::Index>(i)).data(), dim);
                std::copy(r.begin(), r.end(), dst.begin());
                if (config.augment) config.augment(source_index[s], epoch, dst);
            }

            const BatchForward fwd = forward_batch(net, x);
            std::array<RowMatrix, 3> dz;
            for (auto& d : dz) d.resize(static_cast<Eigen::Index>(count), net.bins());
            const double scale = 1.0 / static_cast<double>(count);
            for (std::size_t i = 0; i < count; ++i) {
                const auto row = static_cast<Eigen::Index>(i);
                const EulerAngles& target = train.targets[batch_order[start + i]];
                const AngleHeadOutput out = row_output(fwd, row);
                const MultiLossValue loss = multi_loss(out, target, config.spec, config.loss);
                if (!std::isfinite(loss.total)) {
                    throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch));
                }
                loss_sum += loss.total;
                running.yaw += angle_error(loss.per_angle[0].expected, target.yaw);
                running.pitch += angle_error(loss.per_angle[1].expected, target.pitch);
                running.roll += angle_error(loss.per_angle[2].expected, target.roll);
                const AngleHeadOutput g = multi_loss_gradient(out, target, config.spec, config.loss);
                for (std::size_t k = 0; k < 3; ++k) dz[k].row(row) = g.logits[k].transpose() * scale;
            }

            std::fill(grads.begin(), grads.end(), 0.0);
            backward_batch(net, x, fwd, dz, grads);
            adam_step(net.params(), grads, adam);
        }
        if (!net.all_finite()) throw TrainingDiverged("non-finite parameters at epoch " + std::to_string(epoch));

        const double nt = static_cast<double>(train.size());
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / nt;
        stats.train_mae = (running.yaw + running.pitch + running.roll) / (3.0 * nt);
        stats.val_mae = evaluate_mae(net, val).mean();
        result.curve.push_back(stats);
    }
    return result;
}

std::string format_toynet(const ToyNet& net) {
    std::string out;
    auto num = [&](double v) {
        char buf[32];
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        out.append(buf, r.ptr);
    };
    out += std::string(kMagic) + " " + std::to_string(kFormatVersion) + "\n";
    out += "activation ";
    out += activation_name(net.activation());
    out += "\nbins ";
    num(net.spec().min_angle);
    out += ' ';
    num(net.spec().max_angle);
    out += ' ';
    num(net.spec().bin_width);
    out += ' ' + std::to_string(net.bins()) + "\n";
    out += "shape " + std::to_string(net.inputs()) + " " + std::to_string(net.hidden()) + "\n";
    out += "params " + std::to_string(net.param_count()) + "\n";
    for (double v : net.params()) {
        num(v);
        out += '\n';
    }
    return out;
}

ToyNet parse_toynet(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string word;
    int version = 0;
    if (!(in >> word >> version) || word != kMagic) throw ParseError("missing hpe-toynet header", 1);
    if (version != kFormatVersion) throw ParseError("unsupported toynet version " + std::to_string(version), 1);

    std::string act;
    if (!(in >> word >> act) || word != "activation" || (act != "tanh" && act != "relu")) {
        throw ParseError("expected 'activation tanh|relu'", 2);
    }
    double lo = 0, hi = 0, width = 0;
    int bins = 0;
    if (!(in >> word >> lo >> hi >> width >> bins) || word != "bins") throw ParseError("expected 'bins min max width count'", 3);
    const BinSpec spec = BinSpec::make(lo, hi, width);
    if (spec.num_bins != bins) throw ParseError("bin count does not match range/width", 3);
    int inputs = 0, hidden = 0;
    if (!(in >> word >> inputs >> hidden) || word != "shape") throw ParseError("expected 'shape inputs hidden'", 4);
    std::size_t count = 0;
    if (!(in >> word >> count) || word != "params") throw ParseError("expected 'params count'", 5);

    ToyNet net(inputs, hidden, spec, act == "tanh" ? Activation::tanh : Activation::relu);
    if (count != net.param_count()) throw ShapeMismatch("parameter count does not match shape");
    auto params = net.params();
    for (std::size_t i = 0; i < count; ++i) {
        std::string tok;
        if (!(in >> tok)) throw ParseError("truncated parameter list", 6 + i);
        const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), params[i]);
        if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size()) throw ParseError("bad parameter '" + tok + "'", 6 + i);
    }
    if (std::string extra; in >> extra) throw ParseError("unexpected data after parameters", 6 + count);
    return net;
}

void save_toynet(const ToyNet& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << format_toynet(net);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ToyNet load_toynet(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toynet(ss.str());
}

}  // namespace hpe
