#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

#include "hpe/errors.hpp"
#include "hpe/random.hpp"
#include "hpe/toynet.hpp"

using namespace hpe;

namespace {

// 6 bins of 33 degrees keeps the finite-difference sweep cheap.
const BinSpec kSmallSpec = BinSpec::make(-99, 99, 33);

std::vector<double> random_input(Rng& rng, int n) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = normal(rng);
    return x;
}

EulerAngles random_target(Rng& rng) {
    return {uniform(rng, -90, 90), uniform(rng, -90, 90), uniform(rng, -90, 90)};
}

double sample_loss(const ToyNet& net, std::span<const double> x, const EulerAngles& t, double alpha) {
    return multi_loss(toynet_forward(net, x), t, net.spec(), {alpha}).total;
}

// Targets are a fixed linear function of the inputs, squashed into range.
ToyDataset linear_dataset(int n, int dim, std::uint64_t seed) {
    auto rng = make_rng(seed);
    ToyDataset d;
    d.input_dim = dim;
    for (int i = 0; i < n; ++i) {
        auto x = random_input(rng, dim);
        const double a = 60.0 * std::tanh(0.5 * (x[0] + x[1]));
        const double b = 50.0 * std::tanh(0.5 * (x[2] - x[0]));
        const double c = 40.0 * std::tanh(0.5 * x[3]);
        d.inputs.insert(d.inputs.end(), x.begin(), x.end());
        d.targets.push_back({a, b, c});
    }
    return d;
}

}  // namespace

TEST_CASE("parameter layout") {
    const ToyNet net(5, 4, kSmallSpec);
    CHECK(net.param_count() == 5 * 4 + 4 + 3 * (6 * 4 + 6));
    CHECK(net.w1_offset() == 0);
    CHECK(net.b1_offset() == 20);
    CHECK(net.head_w_offset(0) == 24);
    CHECK(net.head_b_offset(0) == 48);
    CHECK(net.head_w_offset(1) == 54);
    CHECK(net.head_b_offset(2) == net.param_count() - 6);
    CHECK_THROWS_AS(ToyNet(0, 4, kSmallSpec), ShapeMismatch);
    CHECK_THROWS_AS(ToyNet(3, 0, kSmallSpec), ShapeMismatch);
}

TEST_CASE("forward pass by hand") {
    ToyNet net(2, 2, kSmallSpec);
    auto p = net.params();
    // W1 = [[1, 0], [0, 2]], b1 = [0, 0.5].
    p[0] = 1;
    p[3] = 2;
    p[net.b1_offset() + 1] = 0.5;
    // Yaw head: logit j = j * h0, bias 0.1 on bin 5.
    for (int j = 0; j < 6; ++j) p[net.head_w_offset(0) + static_cast<std::size_t>(j) * 2] = j;
    p[net.head_b_offset(0) + 5] = 0.1;
    const std::vector<double> x{0.3, -0.2};
    const auto out = toynet_forward(net, x);
    const double h0 = std::tanh(0.3);
    for (int j = 0; j < 5; ++j) CHECK(out.logits[0](j) == doctest::Approx(j * h0));
    CHECK(out.logits[0](5) == doctest::Approx(5 * h0 + 0.1));
    CHECK(out.logits[1].isZero());
}

TEST_CASE("random init is seeded and Xavier bounded") {
    const auto a = ToyNet::random(10, 8, kSmallSpec, 3);
    const auto b = ToyNet::random(10, 8, kSmallSpec, 3);
    const auto c = ToyNet::random(10, 8, kSmallSpec, 4);
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
    CHECK_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
    const double limit = std::sqrt(6.0 / 18.0);
    for (std::size_t i = 0; i < 80; ++i) CHECK(std::abs(a.params()[i]) <= limit);
    for (std::size_t i = a.b1_offset(); i < a.b1_offset() + 8; ++i) CHECK(a.params()[i] == 0.0);
    CHECK(a.all_finite());
}

TEST_CASE("parameter gradient matches central differences") {
    auto rng = make_rng(41);
    for (int inst = 0; inst < 25; ++inst) {
        const auto net0 = ToyNet::random(5, 4, kSmallSpec, 100 + inst);
        ToyNet net = net0;
        const auto x = random_input(rng, 5);
        const auto t = random_target(rng);
        const double alpha = uniform(rng, 0.0, 3.0);
        const auto dz = multi_loss_gradient(toynet_forward(net, x), t, net.spec(), {alpha});
        const auto grad = toynet_backward(net, x, dz);
        REQUIRE(grad.size() == net.param_count());
        const double h = 1e-6;
        for (std::size_t i = 0; i < net.param_count(); ++i) {
            const double keep = net.params()[i];
            net.params()[i] = keep + h;
            const double up = sample_loss(net, x, t, alpha);
            net.params()[i] = keep - h;
            const double down = sample_loss(net, x, t, alpha);
            net.params()[i] = keep;
            const double fd = (up - down) / (2 * h);
            CHECK(std::abs(grad[i] - fd) / std::max({std::abs(grad[i]), std::abs(fd), 1.0}) < 1e-5);
        }
    }
}

TEST_CASE("relu gradient away from kinks") {
    auto rng = make_rng(42);
    ToyNet net = ToyNet::random(4, 6, kSmallSpec, 9, Activation::relu);
    const auto x = random_input(rng, 4);
    const auto t = random_target(rng);
    const auto grad = toynet_backward(net, x, multi_loss_gradient(toynet_forward(net, x), t, net.spec(), {1.0}));
    const double h = 1e-7;
    for (std::size_t i = 0; i < net.param_count(); ++i) {
        const double keep = net.params()[i];
        net.params()[i] = keep + h;
        const double up = sample_loss(net, x, t, 1.0);
        net.params()[i] = keep - h;
        const double down = sample_loss(net, x, t, 1.0);
        net.params()[i] = keep;
        const double fd = (up - down) / (2 * h);
        CHECK(std::abs(grad[i] - fd) / std::max({std::abs(grad[i]), std::abs(fd), 1.0}) < 1e-5);
    }
}

TEST_CASE("batched backward equals the sum of per-sample gradients") {
    auto rng = make_rng(43);
    const auto net = ToyNet::random(5, 4, kSmallSpec, 1);
    const int n = 7;
    RowMatrix x(n, 5);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 5; ++j) x(i, j) = normal(rng);
    const auto fwd = forward_batch(net, x);
    std::array<RowMatrix, 3> dz;
    for (auto& d : dz) d.resize(n, 6);
    std::vector<double> expect(net.param_count(), 0.0);
    for (int i = 0; i < n; ++i) {
        std::vector<double> xi(x.row(i).data(), x.row(i).data() + 5);
        const auto g = multi_loss_gradient(toynet_forward(net, xi), random_target(rng), net.spec(), {2.0});
        for (std::size_t k = 0; k < 3; ++k) dz[k].row(i) = g.logits[k].transpose();
        const auto gi = toynet_backward(net, xi, g);
        for (std::size_t p = 0; p < gi.size(); ++p) expect[p] += gi[p];
        CHECK((fwd.logits[0].row(i).transpose() - toynet_forward(net, xi).logits[0]).norm() < 1e-14);
    }
    std::vector<double> got(net.param_count(), 0.0);
    backward_batch(net, x, fwd, dz, got);
    for (std::size_t p = 0; p < got.size(); ++p) CHECK(got[p] == doctest::Approx(expect[p]).epsilon(1e-12));
}

TEST_CASE("shape errors") {
    const auto net = ToyNet::random(5, 4, kSmallSpec, 1);
    const std::vector<double> short_x(4, 0.0);
    CHECK_THROWS_AS(toynet_forward(net, short_x), ShapeMismatch);
    AngleHeadOutput g;
    for (auto& z : g.logits) z = Eigen::VectorXd::Zero(5);
    CHECK_THROWS_AS(toynet_backward(net, std::vector<double>(5, 0.0), g), ShapeMismatch);
    std::vector<double> p(3), grads(4);
    AdamState s(3);
    CHECK_THROWS_AS(adam_step(p, grads, s), ShapeMismatch);
}

TEST_CASE("first Adam step moves each weight by lr against its gradient sign") {
    std::vector<double> p{1.0, -2.0, 0.5};
    const std::vector<double> g{0.3, -4.0, 0.0};
    AdamState s(3, 0.01);
    adam_step(p, g, s);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(p[2] == 0.5);
    CHECK(s.step == 1);
    // Second step with the same gradient: bias correction keeps the size at lr.
    adam_step(p, g, s);
    CHECK(p[0] == doctest::Approx(1.0 - 0.02).epsilon(1e-6));
}

TEST_CASE("training reduces validation error and is deterministic") {
    const ToyDataset data = linear_dataset(400, 6, 5);
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.hidden = 16;
    cfg.learning_rate = 1e-2;
    cfg.seed = 11;
    const TrainResult a = train_toy(data, cfg);
    REQUIRE(a.curve.size() == 15);
    CHECK(a.curve.back().val_mae < 0.5 * a.initial_val_mae);
    CHECK(a.curve.back().train_loss < a.curve.front().train_loss);
    const TrainResult b = train_toy(data, cfg);
    CHECK(std::equal(a.net.params().begin(), a.net.params().end(), b.net.params().begin()));
    CHECK(a.curve.back().val_mae == b.curve.back().val_mae);
}

TEST_CASE("augment hook sees every training sample each epoch") {
    const ToyDataset data = linear_dataset(50, 4, 6);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.hidden = 4;
    cfg.val_fraction = 0.2;
    std::set<std::pair<std::size_t, int>> seen;
    cfg.augment = [&](std::size_t idx, int epoch, std::span<double> row) {
        CHECK(row.size() == 4);
        seen.insert({idx, epoch});
    };
    train_toy(data, cfg);
    CHECK(seen.size() == 2 * 40);
}

TEST_CASE("training input validation") {
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train_toy(ToyDataset{3, {}, {}}, cfg), Error);
    ToyDataset bad = linear_dataset(10, 4, 1);
    bad.targets[3].pitch = 120.0;
    CHECK_THROWS_AS(train_toy(bad, cfg), OutOfRange);
    ToyDataset ragged = linear_dataset(10, 4, 1);
    ragged.inputs.pop_back();
    CHECK_THROWS_AS(train_toy(ragged, cfg), ShapeMismatch);
}

TEST_CASE("divergence is reported") {
    ToyDataset data = linear_dataset(20, 4, 2);
    data.inputs[5] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.hidden = 4;
    cfg.val_fraction = 0.0;
    CHECK_THROWS_AS(train_toy(data, cfg), TrainingDiverged);
}

TEST_CASE("evaluate_mae by hand") {
    // A network with all-zero weights predicts the centre of the range.
    const ToyNet net(3, 2, kSmallSpec);
    ToyDataset d;
    d.input_dim = 3;
    d.inputs = {1, 2, 3, 4, 5, 6};
    d.targets = {{10, -20, 30}, {-40, 50, 0}};
    const AngleMae m = evaluate_mae(net, d);
    CHECK(m.yaw == doctest::Approx(25.0));
    CHECK(m.pitch == doctest::Approx(35.0));
    CHECK(m.roll == doctest::Approx(15.0));
    CHECK(m.mean() == doctest::Approx(25.0));
}

TEST_CASE("text format round trip is exact") {
    const auto net = ToyNet::random(7, 5, kSmallSpec, 21, Activation::relu);
    const ToyNet back = parse_toynet(format_toynet(net));
    CHECK(back.inputs() == 7);
    CHECK(back.hidden() == 5);
    CHECK(back.activation() == Activation::relu);
    CHECK(back.spec().num_bins == 6);
    CHECK(std::equal(net.params().begin(), net.params().end(), back.params().begin()));

    const auto path = std::filesystem::temp_directory_path() / "hpe_toynet_roundtrip.txt";
    save_toynet(net, path);
    const ToyNet loaded = load_toynet(path);
    CHECK(std::equal(net.params().begin(), net.params().end(), loaded.params().begin()));
    std::filesystem::remove(path);
}

TEST_CASE("text format errors") {
    const std::string good = format_toynet(ToyNet(2, 2, kSmallSpec));
    CHECK_THROWS_AS(parse_toynet("not-a-net 1\n"), ParseError);
    CHECK_THROWS_AS(parse_toynet("hpe-toynet 2\n"), ParseError);
    CHECK_THROWS_AS(parse_toynet(good.substr(0, good.size() - 4)), ParseError);
    CHECK_THROWS_AS(parse_toynet(good + "1.0\n"), ParseError);
    std::string wrong_count = good;
    wrong_count.replace(wrong_count.find("params 60"), 9, "params 59");
    CHECK_THROWS_AS(parse_toynet(wrong_count), ShapeMismatch);
    CHECK_THROWS_AS(load_toynet("/nonexistent/net.txt"), IoError);
}
