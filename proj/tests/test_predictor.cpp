#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "support.hpp"
#include "vlcuav/predictor.hpp"

using namespace vlcuav;
using namespace vlcuav::predictor;
using vlcuav::testing::Gen;

namespace {

PredictorConfig tiny_config() {
    PredictorConfig c;
    c.grid_side = 8;
    c.layers = 1;
    c.kernel = 3;
    c.feature_maps = {2};
    c.pool = 2;
    c.hidden = 4;
    c.seq_len = 2;
    c.init_range = 0.5;
    c.learn_rate = 0.1;
    c.epochs = 5;
    return c;
}

illum::SynthConfig small_scene(int side, int frames) {
    illum::SynthConfig s;
    s.side = side;
    s.cell_size = 80.0 / side;
    s.frames = frames;
    s.static_blobs = 1;
    s.drifting_blobs = 1;
    s.pulsing_blobs = 1;
    s.sigma_min = 1.0;
    s.sigma_max = 2.0;
    return s;
}

// Capacity used for the overfit and monotone-loss checks.
PredictorConfig overfit_config() {
    PredictorConfig c;
    c.grid_side = 8;
    c.layers = 1;
    c.kernel = 3;
    c.feature_maps = {16};
    c.pool = 2;
    c.hidden = 8;
    c.seq_len = 2;
    return c;
}

std::vector<double*> parameter_pointers(PredictorWeights& w) {
    std::vector<double*> out;
    w.for_each([&](auto& block) {
        for (Eigen::Index k = 0; k < block.size(); ++k) out.push_back(block.data() + k);
    });
    return out;
}

} // namespace

TEST_CASE("config geometry") {
    PredictorConfig c;
    c.grid_side = 30;
    c.layers = 2;
    c.feature_maps = {2, 3};
    CHECK_NOTHROW(c.validate());
    CHECK(c.conv_sides()[1] == 28);
    CHECK(c.pooled_sides()[1] == 14);
    CHECK(c.conv_sides()[2] == 12);
    CHECK(c.pooled_sides()[2] == 6);
    CHECK(c.feature_count() == 36 * 3);
    // 30 -> 28 -> 14 -> 12 -> 6 -> 4: a third layer at pool 2 leaves 2, a fourth cannot fit
    c.layers = 4;
    c.feature_maps = {1, 1, 1, 1};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = PredictorConfig{};
    c.grid_side = 31;  // 29 is not divisible by the pool
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = PredictorConfig{};
    c.feature_maps = {2, 2};
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("parameter count") {
    const auto c = tiny_config();
    const auto w = PredictorWeights::zeros(c);
    const std::size_t n = c.feature_count();  // 3 * 3 * 2
    const std::size_t conv = 2 * 9 + 2;
    const std::size_t gru = 3 * (4 * n + 4 * 4) + n * 4;
    const std::size_t deconv = 2 * 9 + 1;
    CHECK(w.parameter_count() == conv + gru + deconv);
}

TEST_CASE("gradient matches central finite differences on the tiny config") {
    const auto c = tiny_config();
    const auto seq = illum::synth_sequence(11, small_scene(8, 3));
    auto w = PredictorWeights::random(c, 3);
    const std::span<const illum::IlluminationGrid> frames(seq.frames.data(), 2);
    const auto& target = seq.frames[2];

    auto grad = PredictorWeights::zeros(c);
    window_loss(frames, target, w, c, &grad);
    auto ptrs = parameter_pointers(w);
    const auto gptrs = parameter_pointers(grad);
    REQUIRE(ptrs.size() >= 100);

    Gen g(4);
    std::vector<std::size_t> picks(ptrs.size());
    for (std::size_t k = 0; k < picks.size(); ++k) picks[k] = k;
    std::shuffle(picks.begin(), picks.end(), g.engine());
    picks.resize(std::min<std::size_t>(picks.size(), 120));

    int checked = 0;
    for (std::size_t k : picks) {
        const double h = 1e-4;
        const double saved = *ptrs[k];
        const auto at = [&](double offset) {
            *ptrs[k] = saved + offset;
            return window_loss(frames, target, w, c, nullptr);
        };
        // fourth-order central stencil
        const double fd = (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
        *ptrs[k] = saved;
        const double an = *gptrs[k];
        const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
        CHECK_MESSAGE(std::abs(fd - an) / scale <= 1e-4, "parameter " << k << " fd " << fd << " analytic " << an);
        ++checked;
    }
    CHECK(checked >= 100);
}

TEST_CASE("batch gradient is the mean of window gradients") {
    const auto c = tiny_config();
    const std::vector<illum::GridSequence> data{illum::synth_sequence(1, small_scene(8, 5))};
    const auto windows = training_windows(data, c.seq_len);
    REQUIRE(windows.size() == 3);
    const auto w = PredictorWeights::random(c, 2);
    auto batch = PredictorWeights::zeros(c);
    const double total = batch_loss(windows, w, c, &batch);
    auto sum = PredictorWeights::zeros(c);
    double sum_loss = 0;
    for (const auto& win : windows) {
        const std::span<const illum::IlluminationGrid> f(data[0].frames.data() + win.start, c.seq_len);
        sum_loss += window_loss(f, data[0].frames[win.start + c.seq_len], w, c, &sum);
    }
    CHECK(total == doctest::Approx(sum_loss / 3).epsilon(1e-14));
    const auto a = parameter_pointers(batch);
    const auto b = parameter_pointers(sum);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(*a[k] == doctest::Approx(*b[k] / 3).epsilon(1e-12).scale(1e-12));
}

TEST_CASE("zero learning rate leaves the weights unchanged") {
    auto c = tiny_config();
    c.learn_rate = 0.0;
    c.epochs = 4;
    const std::vector<illum::GridSequence> data{illum::synth_sequence(1, small_scene(8, 6))};
    const auto result = train(data, c);
    const auto init = PredictorWeights::random(c, c.seed);
    auto got = result.weights;
    PredictorWeights::zip(got, init, [](auto& a, const auto& b) {
        CHECK((Eigen::Map<const Eigen::VectorXd>(a.data(), a.size()).array() == b.array()).all());
    });
    REQUIRE(result.loss_trace.size() == 4);
    for (double l : result.loss_trace) CHECK(l == result.loss_trace.front());
}

TEST_CASE("training is deterministic for a fixed seed") {
    auto c = tiny_config();
    c.epochs = 20;
    const std::vector<illum::GridSequence> data{illum::synth_sequence(5, small_scene(8, 6))};
    const auto a = train(data, c);
    const auto b = train(data, c);
    CHECK(a.loss_trace == b.loss_trace);
    auto wa = a.weights;
    PredictorWeights::zip(wa, b.weights, [](auto& x, const auto& y) {
        CHECK((Eigen::Map<const Eigen::VectorXd>(x.data(), x.size()).array() == y.array()).all());
    });
    c.seed = 2;
    CHECK(train(data, c).loss_trace != a.loss_trace);
}

TEST_CASE("random init respects the configured range") {
    const auto c = tiny_config();
    const auto w = PredictorWeights::random(c, 9);
    w.for_each([&](const auto& block) { CHECK(block.cwiseAbs().maxCoeff() <= 0.5); });
    CHECK(w.encoder[0].bias.isZero(0.0));
    CHECK(w.decoder[0].bias.isZero(0.0));
}

TEST_CASE("layers fed nonnegative maps start with nonnegative kernel sums") {
    PredictorConfig c;
    c.layers = 2;
    c.feature_maps = {3, 4};
    c.grid_side = 30;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto w = PredictorWeights::random(c, seed);
        const auto check = [](const ConvLayer& layer) {
            for (int o = 0; o < layer.out_maps; ++o) {
                double total = 0;
                for (int i = 0; i < layer.in_maps; ++i) total += layer.kernel(o, i).sum();
                CHECK(total >= 0.0);
            }
        };
        for (const auto& layer : w.encoder) check(layer);
        for (std::size_t l = 1; l < w.decoder.size(); ++l) check(w.decoder[l]);
    }
}

TEST_CASE("GRU state is a convex combination of the previous state and the candidate") {
    const auto c = tiny_config();
    Gen g(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto w = PredictorWeights::random(c, 100 + trial);
        Eigen::VectorXd x(c.feature_count());
        for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = g.uniform(0, 3);
        Eigen::VectorXd h(c.hidden);
        for (Eigen::Index k = 0; k < h.size(); ++k) h(k) = g.uniform(-1, 1);
        const auto s = gru_step(x, h, w);
        for (Eigen::Index k = 0; k < h.size(); ++k) {
            CHECK(s.z(k) >= 0.0);
            CHECK(s.z(k) <= 1.0);
            CHECK(s.r(k) >= 0.0);
            CHECK(s.r(k) <= 1.0);
            CHECK(std::abs(s.candidate(k)) <= 1.0);
            const double lo = std::min(h(k), s.candidate(k));
            const double hi = std::max(h(k), s.candidate(k));
            CHECK(s.h(k) >= lo - 1e-15);
            CHECK(s.h(k) <= hi + 1e-15);
            CHECK(std::abs(s.h(k)) <= 1.0);
        }
    }
}

TEST_CASE("max pooling switches and unpooling") {
    Gen g(12);
    Maps maps;
    for (int m = 0; m < 3; ++m) {
        Map v(6, 6);
        for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = g.uniform(0, 1);
        maps.push_back(v);
    }
    const auto pooled = maxpool_forward(maps, 2);
    REQUIRE(pooled.pooled.size() == 3);
    for (int m = 0; m < 3; ++m) {
        const auto& p = pooled.pooled[m];
        const auto& s = pooled.switches[m];
        REQUIRE(p.rows() == 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const int r = s(i, j) / 6;
                const int col = s(i, j) % 6;
                CHECK(r / 2 == i);
                CHECK(col / 2 == j);
                CHECK(p(i, j) == maps[m](r, col));
                CHECK(p(i, j) == maps[m].block(2 * i, 2 * j, 2, 2).maxCoeff());
            }
    }
    const auto up = unpool(pooled.pooled, pooled.switches, 6);
    for (int m = 0; m < 3; ++m) {
        CHECK((up[m].array() != 0).count() == 9);
        CHECK(up[m].sum() == doctest::Approx(pooled.pooled[m].sum()).epsilon(1e-14));
    }
}

TEST_CASE("pooling ties go to the first cell in row-major order") {
    const Maps flat{Map::Constant(4, 4, 1.0)};
    const auto pooled = maxpool_forward(flat, 2);
    CHECK(pooled.switches[0](0, 0) == 0);
    CHECK(pooled.switches[0](0, 1) == 2);
    CHECK(pooled.switches[0](1, 0) == 8);
    CHECK(pooled.switches[0](1, 1) == 10);
}

TEST_CASE("transposed convolution is the adjoint of the correlation") {
    Gen g(21);
    ConvLayer conv(2, 3, 3);
    for (auto& k : conv.kernels)
        for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = g.uniform(-1, 1);
    conv.bias.setZero();
    ConvLayer adj(3, 2, 3);
    for (int o = 0; o < 3; ++o)
        for (int i = 0; i < 2; ++i) adj.kernel(i, o) = conv.kernel(o, i);
    adj.bias.setZero();
    Maps x;
    for (int i = 0; i < 2; ++i) {
        Map v(7, 7);
        for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = g.uniform(-1, 1);
        x.push_back(v);
    }
    Maps y;
    for (int o = 0; o < 3; ++o) {
        Map v(5, 5);
        for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = g.uniform(-1, 1);
        y.push_back(v);
    }
    const auto ax = conv_linear(x, conv);
    const auto aty = deconv_linear(y, adj);
    double lhs = 0;
    double rhs = 0;
    for (int o = 0; o < 3; ++o) lhs += ax[o].cwiseProduct(y[o]).sum();
    for (int i = 0; i < 2; ++i) rhs += x[i].cwiseProduct(aty[i]).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("forecast shape, nonnegativity and shape errors") {
    const auto c = tiny_config();
    const auto w = PredictorWeights::random(c, 1);
    const auto seq = illum::synth_sequence(2, small_scene(8, 2));
    const auto out = predict_next(seq, w, c);
    CHECK(out.side() == 8);
    CHECK(out.values.minCoeff() >= 0.0);
    const auto wrong = illum::synth_sequence(2, small_scene(10, 2));
    CHECK_THROWS_AS(predict_next(wrong, w, c), ShapeError);
}

TEST_CASE("loss definition") {
    const auto a = testing::flat_grid(1.0, 80, 4);
    const auto b = testing::flat_grid(3.0, 80, 4);
    CHECK(loss(a, b) == doctest::Approx(16 * 4.0 / (2 * 16)));
}

TEST_CASE("training windows") {
    const std::vector<illum::GridSequence> data{illum::synth_sequence(1, small_scene(8, 6)),
                                                illum::synth_sequence(2, small_scene(8, 4))};
    CHECK(training_windows(data, 2).size() == 4 + 2);
    CHECK(training_windows(data, 3).size() == 3 + 1);
    CHECK_THROWS_AS(training_windows(data, 5), DataError);
}

TEST_CASE("checkpoint round trip and architecture mismatch") {
    const auto c = tiny_config();
    const auto w = PredictorWeights::random(c, 77);
    std::stringstream buf;
    write_checkpoint(c, w, buf);
    const std::string text = buf.str();
    {
        std::istringstream in(text);
        auto back = read_checkpoint(in, c);
        PredictorWeights::zip(back, w, [](auto& x, const auto& y) {
            CHECK((Eigen::Map<const Eigen::VectorXd>(x.data(), x.size()).array() == y.array()).all());
        });
    }
    {
        std::istringstream in(text);
        CHECK(read_checkpoint_config(in).same_architecture(c));
    }
    auto other = c;
    other.hidden = 5;
    std::istringstream in(text);
    CHECK_THROWS_AS(read_checkpoint(in, other), ShapeError);
    std::istringstream junk("not a checkpoint\n");
    CHECK_THROWS_AS(read_checkpoint(junk, c), DataError);
    std::istringstream cut(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(read_checkpoint(cut, c), DataError);
}

TEST_CASE("loss trace is non-increasing at a small learning rate") {
    auto c = overfit_config();
    c.learn_rate = 0.001;
    c.epochs = 1000;
    auto s = small_scene(8, 3);
    for (std::uint64_t scene : {1u, 2u}) {
        const std::vector<illum::GridSequence> data{illum::synth_sequence(scene, s)};
        const auto result = train(data, c);
        int upticks = 0;
        for (std::size_t k = 1; k < result.loss_trace.size(); ++k)
            upticks += result.loss_trace[k] > result.loss_trace[k - 1] + 1e-12;
        CHECK(upticks == 0);
        CHECK(result.loss_trace.back() < result.loss_trace.front());
    }
}

TEST_CASE("divergence is reported") {
    auto c = tiny_config();
    c.learn_rate = 1e12;
    c.epochs = 50;
    const std::vector<illum::GridSequence> data{illum::synth_sequence(1, small_scene(8, 6))};
    CHECK_THROWS_AS(train(data, c), NumericalError);
}
