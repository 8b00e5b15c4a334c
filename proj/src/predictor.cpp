#include "vlcuav/predictor.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace vlcuav::predictor {

// ---- configuration -------------------------------------------------------

void PredictorConfig::validate() const {
    auto bad = [](const std::string& what) { throw ConfigError("predictor config: " + what); };
    if (layers < 1) bad("layers must be >= 1");
    if (kernel < 1) bad("kernel must be >= 1");
    if (pool < 1) bad("pool must be >= 1");
    if (hidden < 1) bad("hidden must be >= 1");
    if (seq_len < 1) bad("seq_len must be >= 1");
    if (epochs < 0) bad("epochs must be >= 0");
    if (!(learn_rate >= 0)) bad("learn_rate must be >= 0");
    if (!(init_range >= 0)) bad("init_range must be >= 0");
    if (static_cast<int>(feature_maps.size()) != layers) bad("feature_maps needs one count per layer");
    for (int k : feature_maps)
        if (k < 1) bad("feature map counts must be >= 1");
    int side = grid_side;
    for (int l = 1; l <= layers; ++l) {
        const int conv = side - kernel + 1;
        std::ostringstream os;
        if (conv < 1) {
            os << "layer " << l << ": side " << side << " too small for kernel " << kernel;
            bad(os.str());
        }
        if (conv % pool != 0) {
            os << "layer " << l << ": convolution side " << conv << " not divisible by pool " << pool;
            bad(os.str());
        }
        side = conv / pool;
    }
}

std::vector<int> PredictorConfig::conv_sides() const {
    std::vector<int> out(static_cast<std::size_t>(layers) + 1, 0);
    int side = grid_side;
    for (int l = 1; l <= layers; ++l) {
        out[l] = side - kernel + 1;
        side = out[l] / pool;
    }
    return out;
}

std::vector<int> PredictorConfig::pooled_sides() const {
    std::vector<int> out(static_cast<std::size_t>(layers) + 1, grid_side);
    for (int l = 1; l <= layers; ++l) out[l] = (out[l - 1] - kernel + 1) / pool;
    return out;
}

int PredictorConfig::feature_count() const {
    const int side = pooled_sides().back();
    return side * side * feature_maps.back();
}

bool PredictorConfig::same_architecture(const PredictorConfig& o) const {
    return layers == o.layers && kernel == o.kernel && feature_maps == o.feature_maps && pool == o.pool &&
           hidden == o.hidden && grid_side == o.grid_side;
}

// ---- weights -------------------------------------------------------------

ConvLayer::ConvLayer(int in, int out, int side)
    : in_maps(in), out_maps(out), kernels(static_cast<std::size_t>(in * out), Map::Zero(side, side)),
      bias(Eigen::VectorXd::Zero(out)) {}

PredictorWeights PredictorWeights::zeros(const PredictorConfig& config) {
    config.validate();
    PredictorWeights w;
    const int n = config.feature_count();
    const int dh = config.hidden;
    for (int l = 1; l <= config.layers; ++l) w.encoder.emplace_back(config.maps_in(l), config.maps_out(l), config.kernel);
    for (int l = config.layers; l >= 1; --l) w.decoder.emplace_back(config.maps_out(l), config.maps_in(l), config.kernel);
    w.w_r = w.w_z = w.w_h = Eigen::MatrixXd::Zero(dh, n);
    w.u_r = w.u_z = w.u_h = Eigen::MatrixXd::Zero(dh, dh);
    w.w_o = Eigen::MatrixXd::Zero(n, dh);
    return w;
}

PredictorWeights PredictorWeights::random(const PredictorConfig& config, std::uint64_t seed) {
    PredictorWeights w = zeros(config);
    std::mt19937_64 rng(seed);
    const auto fill = [&](Map& m, double range) {
        std::uniform_real_distribution<double> dist(-range, range);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    };
    const bool fixed = config.init_range > 0;
    const double area = static_cast<double>(config.kernel * config.kernel);
    const double n = config.feature_count();
    const double dh = config.hidden;
    // same block order as for_each
    for (auto& layer : w.encoder)
        for (auto& k : layer.kernels) fill(k, fixed ? config.init_range : std::sqrt(6.0 / (layer.in_maps * area)));
    for (auto* m : {&w.w_r, &w.u_r, &w.w_z, &w.u_z, &w.w_h, &w.u_h}) {
        const double fan = static_cast<double>(m->rows() + m->cols());
        fill(*m, fixed ? config.init_range : std::sqrt(6.0 / fan));
    }
    fill(w.w_o, fixed ? config.init_range : std::sqrt(6.0 / (n + dh)));
    for (auto& layer : w.decoder)
        for (auto& k : layer.kernels) fill(k, fixed ? config.init_range : std::sqrt(6.0 / (layer.in_maps * area)));
    // Layers fed nonnegative maps (every encoder layer, every decoder layer but
    // the first) would start dead on bright input if their kernels summed
    // below zero; such an output map has its kernels negated.
    const auto orient = [](ConvLayer& layer) {
        for (int o = 0; o < layer.out_maps; ++o) {
            double total = 0.0;
            for (int i = 0; i < layer.in_maps; ++i) total += layer.kernel(o, i).sum();
            if (total < 0)
                for (int i = 0; i < layer.in_maps; ++i) layer.kernel(o, i) *= -1.0;
        }
    };
    for (auto& layer : w.encoder) orient(layer);
    for (std::size_t l = 1; l < w.decoder.size(); ++l) orient(w.decoder[l]);
    return w;
}

std::size_t PredictorWeights::parameter_count() const {
    std::size_t n = 0;
    for_each([&](const auto& block) { n += static_cast<std::size_t>(block.size()); });
    return n;
}

bool PredictorWeights::all_finite() const {
    bool ok = true;
    for_each([&](const auto& block) { ok = ok && block.allFinite(); });
    return ok;
}

// ---- layers --------------------------------------------------------------

namespace {

void check_maps(const Maps& maps, int count, const char* where) {
    if (static_cast<int>(maps.size()) != count) {
        std::ostringstream os;
        os << where << ": expected " << count << " maps, got " << maps.size();
        throw ShapeError(os.str());
    }
    for (const auto& m : maps)
        if (m.rows() != maps.front().rows() || m.cols() != maps.front().rows())
            throw ShapeError(std::string(where) + ": maps must be square and equally sized");
}

Map relu(const Map& m) { return m.cwiseMax(0.0); }

Maps relu(const Maps& maps) {
    Maps out;
    out.reserve(maps.size());
    for (const auto& m : maps) out.push_back(relu(m));
    return out;
}

} // namespace

Maps conv_linear(const Maps& input, const ConvLayer& layer) {
    check_maps(input, layer.in_maps, "conv_forward");
    const int s = static_cast<int>(layer.kernels.front().rows());
    const int n = static_cast<int>(input.front().rows());
    const int os = n - s + 1;
    if (os < 1) throw ShapeError("conv_forward: kernel larger than input");
    Maps out;
    out.reserve(static_cast<std::size_t>(layer.out_maps));
    for (int m = 0; m < layer.out_maps; ++m) {
        Map acc = Map::Constant(os, os, layer.bias(m));
        for (int k = 0; k < layer.in_maps; ++k) {
            const Map& w = layer.kernel(m, k);
            for (int a = 0; a < s; ++a)
                for (int b = 0; b < s; ++b) acc.noalias() += w(a, b) * input[k].block(a, b, os, os);
        }
        out.push_back(std::move(acc));
    }
    return out;
}

Maps conv_forward(const Maps& input, const ConvLayer& layer) { return relu(conv_linear(input, layer)); }

PoolResult maxpool_forward(const Maps& maps, int window) {
    PoolResult res;
    if (window < 1) throw ShapeError("maxpool_forward: window must be >= 1");
    for (const auto& m : maps) {
        const int n = static_cast<int>(m.rows());
        if (m.cols() != n || n % window != 0) {
            std::ostringstream os;
            os << "maxpool_forward: map side " << n << " not divisible by window " << window;
            throw ShapeError(os.str());
        }
        const int ps = n / window;
        Map pooled(ps, ps);
        Switches sw(ps, ps);
        for (int i = 0; i < ps; ++i) {
            for (int j = 0; j < ps; ++j) {
                int br = i * window;
                int bc = j * window;
                double best = m(br, bc);
                for (int a = 0; a < window; ++a) {
                    for (int b = 0; b < window; ++b) {
                        const double v = m(i * window + a, j * window + b);
                        if (v > best) {
                            best = v;
                            br = i * window + a;
                            bc = j * window + b;
                        }
                    }
                }
                pooled(i, j) = best;
                sw(i, j) = br * n + bc;
            }
        }
        res.pooled.push_back(std::move(pooled));
        res.switches.push_back(std::move(sw));
    }
    return res;
}

Maps unpool(const Maps& maps, const std::vector<Switches>& switches, int out_side) {
    if (maps.size() != switches.size()) throw ShapeError("unpool: map and switch counts differ");
    Maps out;
    out.reserve(maps.size());
    for (std::size_t k = 0; k < maps.size(); ++k) {
        if (maps[k].rows() != switches[k].rows() || maps[k].cols() != switches[k].cols())
            throw ShapeError("unpool: switch shape does not match map shape");
        Map big = Map::Zero(out_side, out_side);
        for (int i = 0; i < maps[k].rows(); ++i) {
            for (int j = 0; j < maps[k].cols(); ++j) {
                const int idx = switches[k](i, j);
                if (idx < 0 || idx >= out_side * out_side) throw ShapeError("unpool: switch index out of range");
                big(idx / out_side, idx % out_side) = maps[k](i, j);
            }
        }
        out.push_back(std::move(big));
    }
    return out;
}

Maps deconv_linear(const Maps& input, const ConvLayer& layer) {
    check_maps(input, layer.in_maps, "deconv_forward");
    const int s = static_cast<int>(layer.kernels.front().rows());
    const int n = static_cast<int>(input.front().rows());
    const int os = n + s - 1;
    Maps out;
    out.reserve(static_cast<std::size_t>(layer.out_maps));
    for (int m = 0; m < layer.out_maps; ++m) {
        Map acc = Map::Constant(os, os, layer.bias(m));
        for (int k = 0; k < layer.in_maps; ++k) {
            const Map& w = layer.kernel(m, k);
            for (int a = 0; a < s; ++a)
                for (int b = 0; b < s; ++b) acc.block(a, b, n, n).noalias() += w(a, b) * input[k];
        }
        out.push_back(std::move(acc));
    }
    return out;
}

Maps deconv_forward(const Maps& input, const ConvLayer& layer) { return relu(deconv_linear(input, layer)); }

// ---- encoder / GRU / decoder ---------------------------------------------

EncodeTrace encode(const illum::IlluminationGrid& grid, const PredictorWeights& weights, const PredictorConfig& config) {
    if (grid.side() != config.grid_side || grid.values.cols() != config.grid_side) {
        std::ostringstream os;
        os << "encode: grid side " << grid.side() << " does not match configured " << config.grid_side;
        throw ShapeError(os.str());
    }
    if (static_cast<int>(weights.encoder.size()) != config.layers) throw ShapeError("encode: weights/config layer mismatch");
    EncodeTrace trace;
    Maps current{grid.values};
    for (int l = 1; l <= config.layers; ++l) {
        trace.inputs.push_back(current);
        Maps pre = conv_linear(current, weights.encoder[l - 1]);
        PoolResult pooled = maxpool_forward(relu(pre), config.pool);
        trace.preact.push_back(std::move(pre));
        trace.switches.push_back(std::move(pooled.switches));
        current = std::move(pooled.pooled);
    }
    const int side = static_cast<int>(current.front().rows());
    const int per_map = side * side;
    trace.features.resize(static_cast<Eigen::Index>(per_map) * static_cast<Eigen::Index>(current.size()));
    for (std::size_t m = 0; m < current.size(); ++m) {
        // row-major flatten within each map
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c) trace.features(static_cast<Eigen::Index>(m) * per_map + r * side + c) = current[m](r, c);
    }
    return trace;
}

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& a) {
    return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Maps unflatten(const Eigen::VectorXd& x, int maps, int side) {
    if (x.size() != static_cast<Eigen::Index>(maps) * side * side) {
        std::ostringstream os;
        os << "decode: feature vector length " << x.size() << " != " << maps * side * side;
        throw ShapeError(os.str());
    }
    Maps out(static_cast<std::size_t>(maps), Map(side, side));
    for (int m = 0; m < maps; ++m)
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c) out[m](r, c) = x(static_cast<Eigen::Index>(m) * side * side + r * side + c);
    return out;
}

Eigen::VectorXd flatten(const Maps& maps) {
    const int side = static_cast<int>(maps.front().rows());
    Eigen::VectorXd x(static_cast<Eigen::Index>(maps.size()) * side * side);
    for (std::size_t m = 0; m < maps.size(); ++m)
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c) x(static_cast<Eigen::Index>(m) * side * side + r * side + c) = maps[m](r, c);
    return x;
}

} // namespace

GruState gru_step(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev, const PredictorWeights& weights) {
    if (x.size() != weights.w_r.cols() || h_prev.size() != weights.u_r.cols())
        throw ShapeError("gru_step: input or state length does not match the weights");
    GruState s;
    s.r = sigmoid(weights.w_r * x + weights.u_r * h_prev);
    s.z = sigmoid(weights.w_z * x + weights.u_z * h_prev);
    s.candidate = (weights.w_h * x + weights.u_h * s.r.cwiseProduct(h_prev)).array().tanh().matrix();
    s.h = s.z.cwiseProduct(h_prev) + (Eigen::VectorXd::Ones(s.z.size()) - s.z).cwiseProduct(s.candidate);
    return s;
}

Eigen::VectorXd predict_features(std::span<const Eigen::VectorXd> xs, const PredictorWeights& weights) {
    if (xs.empty()) throw ShapeError("predict_features: empty input sequence");
    Eigen::VectorXd h = Eigen::VectorXd::Zero(weights.u_r.rows());
    for (const auto& x : xs) h = gru_step(x, h, weights).h;
    return weights.w_o * h;
}

DecodeTrace decode_traced(const Eigen::VectorXd& x, const std::vector<std::vector<Switches>>& switches,
                          const PredictorWeights& weights, const PredictorConfig& config) {
    if (static_cast<int>(switches.size()) != config.layers) throw ShapeError("decode: need switches for every layer");
    if (static_cast<int>(weights.decoder.size()) != config.layers) throw ShapeError("decode: weights/config layer mismatch");
    const auto conv = config.conv_sides();
    const auto pooled = config.pooled_sides();
    DecodeTrace trace;
    Maps current = unflatten(x, config.feature_maps.back(), pooled[config.layers]);
    for (int k = 0; k < config.layers; ++k) {
        const int l = config.layers - k;
        trace.unpooled.push_back(unpool(current, switches[l - 1], conv[l]));
        Maps pre = deconv_linear(trace.unpooled.back(), weights.decoder[k]);
        current = relu(pre);
        trace.preact.push_back(std::move(pre));
    }
    trace.output = std::move(current.front());
    return trace;
}

illum::IlluminationGrid decode(const Eigen::VectorXd& x, const std::vector<std::vector<Switches>>& switches,
                               const PredictorWeights& weights, const PredictorConfig& config) {
    return illum::IlluminationGrid(decode_traced(x, switches, weights, config).output, 1.0);
}

double loss(const illum::IlluminationGrid& predicted, const illum::IlluminationGrid& actual) {
    if (predicted.values.rows() != actual.values.rows() || predicted.values.cols() != actual.values.cols())
        throw ShapeError("loss: grid sizes differ");
    const double n = static_cast<double>(actual.values.rows());
    return (actual.values - predicted.values).squaredNorm() / (2.0 * n * n);
}

illum::IlluminationGrid predict_next(std::span<const illum::IlluminationGrid> frames, const PredictorWeights& weights,
                                     const PredictorConfig& config) {
    if (frames.empty()) throw ShapeError("predict_next: empty sequence");
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(frames.size());
    EncodeTrace last;
    for (const auto& f : frames) {
        last = encode(f, weights, config);
        xs.push_back(last.features);
    }
    const Eigen::VectorXd next = predict_features(xs, weights);
    return illum::IlluminationGrid(decode_traced(next, last.switches, weights, config).output, frames.back().cell_size,
                                   frames.back().origin);
}

illum::IlluminationGrid predict_next(const illum::GridSequence& sequence, const PredictorWeights& weights,
                                     const PredictorConfig& config) {
    return predict_next(std::span<const illum::IlluminationGrid>(sequence.frames), weights, config);
}

// ---- backpropagation -----------------------------------------------------

namespace {

// Gradient of a valid correlation layer given d(preactivation); returns the
// gradient with respect to the layer input when `want_input` is set.
Maps conv_backward(const Maps& input, const Maps& dpre, const ConvLayer& layer, ConvLayer& grad, bool want_input) {
    const int s = static_cast<int>(layer.kernels.front().rows());
    const int n = static_cast<int>(input.front().rows());
    const int os = n - s + 1;
    Maps dinput;
    if (want_input) dinput.assign(static_cast<std::size_t>(layer.in_maps), Map::Zero(n, n));
    for (int m = 0; m < layer.out_maps; ++m) {
        grad.bias(m) += dpre[m].sum();
        for (int k = 0; k < layer.in_maps; ++k) {
            Map& gw = grad.kernel(m, k);
            const Map& w = layer.kernel(m, k);
            for (int a = 0; a < s; ++a) {
                for (int b = 0; b < s; ++b) {
                    gw(a, b) += dpre[m].cwiseProduct(input[k].block(a, b, os, os)).sum();
                    if (want_input) dinput[k].block(a, b, os, os).noalias() += w(a, b) * dpre[m];
                }
            }
        }
    }
    return dinput;
}

// Gradient of a transposed convolution layer given d(preactivation).
Maps deconv_backward(const Maps& input, const Maps& dpre, const ConvLayer& layer, ConvLayer& grad) {
    const int s = static_cast<int>(layer.kernels.front().rows());
    const int n = static_cast<int>(input.front().rows());
    Maps dinput(static_cast<std::size_t>(layer.in_maps), Map::Zero(n, n));
    for (int m = 0; m < layer.out_maps; ++m) {
        grad.bias(m) += dpre[m].sum();
        for (int k = 0; k < layer.in_maps; ++k) {
            Map& gw = grad.kernel(m, k);
            const Map& w = layer.kernel(m, k);
            for (int a = 0; a < s; ++a) {
                for (int b = 0; b < s; ++b) {
                    const auto window = dpre[m].block(a, b, n, n);
                    gw(a, b) += input[k].cwiseProduct(window).sum();
                    dinput[k].noalias() += w(a, b) * window;
                }
            }
        }
    }
    return dinput;
}

// Route pooled-level gradients back to the recorded argmax cells.
Maps scatter_to_switches(const Maps& dpooled, const std::vector<Switches>& switches, int side) {
    return unpool(dpooled, switches, side);
}

// Adjoint of unpool: read each pooled cell's gradient from its switch.
Maps gather_from_switches(const Maps& dbig, const std::vector<Switches>& switches) {
    Maps out;
    out.reserve(dbig.size());
    for (std::size_t k = 0; k < dbig.size(); ++k) {
        const int side = static_cast<int>(dbig[k].rows());
        Map small(switches[k].rows(), switches[k].cols());
        for (int i = 0; i < small.rows(); ++i)
            for (int j = 0; j < small.cols(); ++j) {
                const int idx = switches[k](i, j);
                small(i, j) = dbig[k](idx / side, idx % side);
            }
        out.push_back(std::move(small));
    }
    return out;
}

void mask_relu(Maps& grad, const Maps& pre) {
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = (pre[k].array() > 0.0).select(grad[k], 0.0);
}

void encode_backward(const EncodeTrace& trace, const Eigen::VectorXd& dx, const PredictorWeights& weights,
                     const PredictorConfig& config, PredictorWeights& grad) {
    const auto conv = config.conv_sides();
    const auto pooled = config.pooled_sides();
    Maps dpooled = unflatten(dx, config.feature_maps.back(), pooled[config.layers]);
    for (int l = config.layers; l >= 1; --l) {
        Maps dpre = scatter_to_switches(dpooled, trace.switches[l - 1], conv[l]);
        mask_relu(dpre, trace.preact[l - 1]);
        dpooled = conv_backward(trace.inputs[l - 1], dpre, weights.encoder[l - 1], grad.encoder[l - 1], l > 1);
    }
}

} // namespace

double window_loss(std::span<const illum::IlluminationGrid> frames, const illum::IlluminationGrid& target,
                   const PredictorWeights& weights, const PredictorConfig& config, PredictorWeights* grad) {
    if (frames.empty()) throw ShapeError("window_loss: empty window");
    const int steps = static_cast<int>(frames.size());
    std::vector<EncodeTrace> enc;
    enc.reserve(frames.size());
    for (const auto& f : frames) enc.push_back(encode(f, weights, config));

    const Eigen::Index dh = weights.u_r.rows();
    std::vector<Eigen::VectorXd> hs{Eigen::VectorXd::Zero(dh)};
    std::vector<GruState> states;
    states.reserve(frames.size());
    for (int t = 0; t < steps; ++t) {
        states.push_back(gru_step(enc[t].features, hs.back(), weights));
        hs.push_back(states.back().h);
    }
    const Eigen::VectorXd xhat = weights.w_o * hs.back();
    const DecodeTrace dec = decode_traced(xhat, enc.back().switches, weights, config);

    const double n = static_cast<double>(config.grid_side);
    const Map diff = dec.output - target.values;
    const double value = diff.squaredNorm() / (2.0 * n * n);
    if (!grad) return value;

    // decoder
    Maps dcur{diff / (n * n)};
    for (int k = config.layers - 1; k >= 0; --k) {
        Maps dpre = dcur;
        mask_relu(dpre, dec.preact[k]);
        const Maps dunpooled = deconv_backward(dec.unpooled[k], dpre, weights.decoder[k], grad->decoder[k]);
        const int l = config.layers - k;
        dcur = gather_from_switches(dunpooled, enc.back().switches[l - 1]);
    }
    const Eigen::VectorXd dxhat = flatten(dcur);

    // output projection and GRU through time
    grad->w_o.noalias() += dxhat * hs.back().transpose();
    Eigen::VectorXd dh_next = weights.w_o.transpose() * dxhat;
    std::vector<Eigen::VectorXd> dxs(frames.size());
    for (int t = steps - 1; t >= 0; --t) {
        const GruState& s = states[t];
        const Eigen::VectorXd& hp = hs[t];
        const Eigen::VectorXd& x = enc[t].features;
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(dh);

        const Eigen::VectorXd dz = dh_next.cwiseProduct(hp - s.candidate);
        const Eigen::VectorXd dcand = dh_next.cwiseProduct(ones - s.z);
        Eigen::VectorXd dhp = dh_next.cwiseProduct(s.z);

        const Eigen::VectorXd da_h = dcand.cwiseProduct(ones - s.candidate.cwiseProduct(s.candidate));
        const Eigen::VectorXd rh = s.r.cwiseProduct(hp);
        grad->w_h.noalias() += da_h * x.transpose();
        grad->u_h.noalias() += da_h * rh.transpose();
        const Eigen::VectorXd drh = weights.u_h.transpose() * da_h;
        const Eigen::VectorXd dr = drh.cwiseProduct(hp);
        dhp += drh.cwiseProduct(s.r);

        const Eigen::VectorXd da_z = dz.cwiseProduct(s.z.cwiseProduct(ones - s.z));
        grad->w_z.noalias() += da_z * x.transpose();
        grad->u_z.noalias() += da_z * hp.transpose();
        dhp.noalias() += weights.u_z.transpose() * da_z;

        const Eigen::VectorXd da_r = dr.cwiseProduct(s.r.cwiseProduct(ones - s.r));
        grad->w_r.noalias() += da_r * x.transpose();
        grad->u_r.noalias() += da_r * hp.transpose();
        dhp.noalias() += weights.u_r.transpose() * da_r;

        dxs[t] = weights.w_h.transpose() * da_h + weights.w_z.transpose() * da_z + weights.w_r.transpose() * da_r;
        dh_next = dhp;
    }

    // encoder, shared across time steps
    for (int t = 0; t < steps; ++t) encode_backward(enc[t], dxs[t], weights, config, *grad);
    return value;
}

std::vector<TrainingWindow> training_windows(std::span<const illum::GridSequence> dataset, int seq_len) {
    std::vector<TrainingWindow> out;
    for (const auto& seq : dataset) {
        if (seq.length() < seq_len + 1) {
            std::ostringstream os;
            os << "training sequence has " << seq.length() << " frames, need at least " << seq_len + 1;
            throw DataError(os.str());
        }
        for (int s = 0; s + seq_len < seq.length(); ++s) out.push_back({&seq, s});
    }
    return out;
}

double batch_loss(std::span<const TrainingWindow> windows, const PredictorWeights& weights,
                  const PredictorConfig& config, PredictorWeights* grad) {
    if (windows.empty()) throw DataError("batch_loss: no training windows");
    double total = 0.0;
    for (const auto& w : windows) {
        const auto frames = std::span<const illum::IlluminationGrid>(w.sequence->frames).subspan(
            static_cast<std::size_t>(w.start), static_cast<std::size_t>(config.seq_len));
        total += window_loss(frames, w.sequence->frames[static_cast<std::size_t>(w.start + config.seq_len)], weights,
                             config, grad);
    }
    const double scale = 1.0 / static_cast<double>(windows.size());
    if (grad) grad->for_each([&](auto& block) { block *= scale; });
    return total * scale;
}

TrainResult train_from(PredictorWeights initial, std::span<const illum::GridSequence> dataset,
                       const PredictorConfig& config) {
    config.validate();
    for (const auto& seq : dataset) {
        seq.validate();
        if (seq.frames.front().side() != config.grid_side) throw ShapeError("train: grid side does not match config");
    }
    const auto windows = training_windows(dataset, config.seq_len);
    TrainResult res{std::move(initial), {}};
    res.loss_trace.reserve(static_cast<std::size_t>(config.epochs));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        PredictorWeights grad = PredictorWeights::zeros(config);
        const double value = batch_loss(windows, res.weights, config, &grad);
        if (!std::isfinite(value) || !grad.all_finite()) {
            std::ostringstream os;
            os << "train: non-finite loss at epoch " << epoch << " (learn_rate " << config.learn_rate << ")";
            throw NumericalError(os.str());
        }
        res.loss_trace.push_back(value);
        PredictorWeights::zip(res.weights, grad, [&](auto& block, const auto& g) {
            Eigen::Map<Eigen::VectorXd>(block.data(), block.size()) -= config.learn_rate * g;
        });
    }
    return res;
}

TrainResult train(std::span<const illum::GridSequence> dataset, const PredictorConfig& config) {
    config.validate();
    return train_from(PredictorWeights::random(config, config.seed), dataset, config);
}

} // namespace vlcuav::predictor
