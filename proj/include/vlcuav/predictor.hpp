// predictor.hpp
//
// Convolutional encoder -> GRU -> mirrored deconvolutional decoder that
// forecasts the next illumination grid from a window of past grids, with
// hand-written backpropagation and full-batch gradient descent.
//
// Feature maps are dense Eigen matrices. Kernels are applied as a sliding
// window correlation (no flipping); the decoder's transposed convolution is
// the exact adjoint of that correlation.

#ifndef VLCUAV_PREDICTOR_HPP
#define VLCUAV_PREDICTOR_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vlcuav/errors.hpp"
#include "vlcuav/illum.hpp"

namespace vlcuav::predictor {

using Map = Eigen::MatrixXd;
using Maps = std::vector<Map>;
using Switches = Eigen::MatrixXi;  // linear index row * side + col into the pre-pool map

struct PredictorConfig {
    int layers = 1;                     // L
    int kernel = 3;                     // S
    std::vector<int> feature_maps{2};   // K^1..K^L
    int pool = 2;                       // S_m
    int hidden = 32;                    // D_h
    int grid_side = 30;                 // lambda_0
    double learn_rate = 3.0;            // alpha
    int epochs = 1000;                  // e
    int seq_len = 3;                    // T
    double init_range = 0.0;            // > 0: uniform on [-r, r]; 0: fan-scaled uniform
    std::uint64_t seed = 1;

    /// Throws ConfigError unless every layer size is an integer >= 1.
    void validate() const;
    /// Side of the convolution output at layer l = 1..L (index 0 unused).
    std::vector<int> conv_sides() const;
    /// Side after pooling at layer l; entry 0 is the grid side.
    std::vector<int> pooled_sides() const;
    /// Maps entering layer l (1 for l = 1).
    int maps_in(int layer) const { return layer == 1 ? 1 : feature_maps[layer - 2]; }
    int maps_out(int layer) const { return feature_maps[layer - 1]; }
    /// N = lambda_L^2 * K^L.
    int feature_count() const;
    /// True when the architecture (everything but training knobs) matches.
    bool same_architecture(const PredictorConfig& other) const;
};

/// One convolution or transposed-convolution layer: a kernel per
/// (output map, input map) pair and a bias per output map.
struct ConvLayer {
    int in_maps = 0;
    int out_maps = 0;
    std::vector<Map> kernels;  // index out * in_maps + in
    Eigen::VectorXd bias;

    ConvLayer() = default;
    ConvLayer(int in, int out, int side);
    Map& kernel(int out, int in) { return kernels[static_cast<std::size_t>(out * in_maps + in)]; }
    const Map& kernel(int out, int in) const { return kernels[static_cast<std::size_t>(out * in_maps + in)]; }
};

/// Every trainable tensor. The GRU input matrices are stored D_h x N and the
/// output matrix N x D_h so that they act on column vectors directly.
struct PredictorWeights {
    std::vector<ConvLayer> encoder;  // encoder[l-1] maps layer l-1 -> l
    std::vector<ConvLayer> decoder;  // decoder[0] starts from the innermost level
    Eigen::MatrixXd w_r, u_r, w_z, u_z, w_h, u_h, w_o;

    static PredictorWeights zeros(const PredictorConfig& config);
    /// Kernels and matrices drawn uniformly, biases zero. With a positive
    /// init_range every entry lies in [-init_range, init_range]; otherwise the
    /// range is sqrt(6 / fan_in) for the ReLU layers and sqrt(6 / (fan_in + fan_out))
    /// for the recurrent and output matrices. Kernels of layers that only see
    /// nonnegative maps are sign-flipped per output map to a nonnegative sum.
    static PredictorWeights random(const PredictorConfig& config, std::uint64_t seed);

    /// Visit every parameter block in the fixed checkpoint order.
    template <typename F>
    void for_each(F&& f);
    template <typename F>
    void for_each(F&& f) const;
    template <typename F>
    static void zip(PredictorWeights& a, const PredictorWeights& b, F&& f);

    std::size_t parameter_count() const;
    bool all_finite() const;
};

// ---- layers -------------------------------------------------------------

/// Valid correlation of `input` with `layer`, plus bias, before activation.
Maps conv_linear(const Maps& input, const ConvLayer& layer);
/// ReLU(conv_linear(input, layer)).
Maps conv_forward(const Maps& input, const ConvLayer& layer);

struct PoolResult {
    Maps pooled;
    std::vector<Switches> switches;
};

/// Non-overlapping max pooling; ties go to the first cell in row-major order.
PoolResult maxpool_forward(const Maps& maps, int window);

/// Place each value at its recorded switch in a zero map of side `out_side`.
Maps unpool(const Maps& maps, const std::vector<Switches>& switches, int out_side);

/// Full transposed convolution (side grows by S - 1) plus bias, before activation.
Maps deconv_linear(const Maps& input, const ConvLayer& layer);
/// ReLU(deconv_linear(input, layer)).
Maps deconv_forward(const Maps& input, const ConvLayer& layer);

// ---- encoder / GRU / decoder ---------------------------------------------

struct EncodeTrace {
    std::vector<Maps> inputs;     // inputs[l-1]: maps entering layer l
    std::vector<Maps> preact;     // preact[l-1]: conv output before ReLU
    std::vector<std::vector<Switches>> switches;  // per layer, per map
    Eigen::VectorXd features;     // x_t, length N
};

EncodeTrace encode(const illum::IlluminationGrid& grid, const PredictorWeights& weights, const PredictorConfig& config);

struct GruState {
    Eigen::VectorXd h;
    Eigen::VectorXd r;
    Eigen::VectorXd z;
    Eigen::VectorXd candidate;
};

GruState gru_step(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev, const PredictorWeights& weights);

/// Run the GRU from h_0 = 0 over `xs` and project the final state with W_o.
Eigen::VectorXd predict_features(std::span<const Eigen::VectorXd> xs, const PredictorWeights& weights);

struct DecodeTrace {
    std::vector<Maps> unpooled;   // unpooled[k]: input to decoder[k]
    std::vector<Maps> preact;     // preact[k]: decoder[k] output before ReLU
    Map output;
};

DecodeTrace decode_traced(const Eigen::VectorXd& x, const std::vector<std::vector<Switches>>& switches,
                          const PredictorWeights& weights, const PredictorConfig& config);
illum::IlluminationGrid decode(const Eigen::VectorXd& x, const std::vector<std::vector<Switches>>& switches,
                               const PredictorWeights& weights, const PredictorConfig& config);

/// E = sum (I - I~)^2 / (2 lambda_0^2).
double loss(const illum::IlluminationGrid& predicted, const illum::IlluminationGrid& actual);

/// Forecast of the frame following `frames`, decoded with the switches of
/// the last frame.
illum::IlluminationGrid predict_next(std::span<const illum::IlluminationGrid> frames, const PredictorWeights& weights,
                                     const PredictorConfig& config);
illum::IlluminationGrid predict_next(const illum::GridSequence& sequence, const PredictorWeights& weights,
                                     const PredictorConfig& config);

// ---- training ----------------------------------------------------------

/// Loss of one (window, target) pair; when `grad` is non-null the exact
/// gradient of that loss is added into it.
double window_loss(std::span<const illum::IlluminationGrid> frames, const illum::IlluminationGrid& target,
                   const PredictorWeights& weights, const PredictorConfig& config, PredictorWeights* grad);

/// Training pairs: every run of seq_len consecutive frames followed by its target.
struct TrainingWindow {
    const illum::GridSequence* sequence;
    int start;
};
std::vector<TrainingWindow> training_windows(std::span<const illum::GridSequence> dataset, int seq_len);

/// Mean window loss and (optionally) its gradient over the whole batch.
double batch_loss(std::span<const TrainingWindow> windows, const PredictorWeights& weights,
                  const PredictorConfig& config, PredictorWeights* grad);

struct TrainResult {
    PredictorWeights weights;
    std::vector<double> loss_trace;  // batch loss before each epoch's update
};

/// Seeded uniform initialisation followed by `epochs` full-batch gradient
/// descent steps W <- W - alpha * grad E. Throws NumericalError on divergence.
TrainResult train(std::span<const illum::GridSequence> dataset, const PredictorConfig& config);
/// Same, starting from the given weights.
TrainResult train_from(PredictorWeights initial, std::span<const illum::GridSequence> dataset,
                       const PredictorConfig& config);

// ---- checkpoints ---------------------------------------------------------

void write_checkpoint(const PredictorConfig& config, const PredictorWeights& weights, std::ostream& out);
/// Reads a checkpoint; the stored architecture must equal `expected`'s.
PredictorWeights read_checkpoint(std::istream& in, const PredictorConfig& expected);
/// Reads a checkpoint and returns the architecture it declares.
PredictorConfig read_checkpoint_config(std::istream& in);
void save_checkpoint(const PredictorConfig& config, const PredictorWeights& weights, const std::filesystem::path& path);
PredictorWeights load_checkpoint(const std::filesystem::path& path, const PredictorConfig& expected);

// ---- template definitions ---------------------------------------------

template <typename F>
void PredictorWeights::for_each(F&& f) {
    for (std::size_t l = 0; l < encoder.size(); ++l) {
        for (auto& k : encoder[l].kernels) f(k);
        f(encoder[l].bias);
    }
    f(w_r); f(u_r); f(w_z); f(u_z); f(w_h); f(u_h); f(w_o);
    for (std::size_t l = 0; l < decoder.size(); ++l) {
        for (auto& k : decoder[l].kernels) f(k);
        f(decoder[l].bias);
    }
}

template <typename F>
void PredictorWeights::for_each(F&& f) const {
    const_cast<PredictorWeights*>(this)->for_each([&](const auto& block) { f(block); });
}

template <typename F>
void PredictorWeights::zip(PredictorWeights& a, const PredictorWeights& b, F&& f) {
    std::vector<const double*> starts;
    std::vector<Eigen::Index> sizes;
    b.for_each([&](const auto& block) {
        starts.push_back(block.data());
        sizes.push_back(block.size());
    });
    std::size_t k = 0;
    a.for_each([&](auto& block) {
        if (k >= starts.size() || sizes[k] != block.size()) throw ShapeError("PredictorWeights::zip: shape mismatch");
        f(block, Eigen::Map<const Eigen::VectorXd>(starts[k], sizes[k]));
        ++k;
    });
}

} // namespace vlcuav::predictor

#endif // VLCUAV_PREDICTOR_HPP
