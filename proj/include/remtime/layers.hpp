#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "remtime/autodiff.hpp"
#include "remtime/random.hpp"

namespace remtime::nn {

enum class Architecture { cnn, lstm, mlp };
enum class DropoutMode { none, fixed, concrete };

std::string to_string(Architecture a);
std::string to_string(DropoutMode m);
Architecture parse_architecture(const std::string& s);
DropoutMode parse_dropout_mode(const std::string& s);

struct ModelSpec {
    Architecture arch = Architecture::cnn;

    // Input description, filled from the encoded log.
    std::vector<std::size_t> vocab_sizes;     // per categorical slot
    std::vector<std::size_t> embedding_dims;  // per categorical slot
    std::size_t numeric_features = 0;
    std::size_t sequence_length = 16;

    std::vector<std::size_t> conv_channels{32, 32};
    std::size_t kernel_size = 3;
    std::vector<std::size_t> dense_units{64};
    std::size_t lstm_hidden = 64;

    DropoutMode dropout = DropoutMode::concrete;
    double dropout_p = 0.05;        // fixed mode
    double concrete_init_p = 0.1;   // concrete mode start value
    double temperature = 0.1;       // concrete relaxation
    double length_scale = 1e-2;     // prior length-scale of the regularizer
    bool heteroscedastic = true;

    /// Channels per timestep after embedding.
    std::size_t input_channels() const;
    void validate() const;
};

/// Per-architecture layer defaults (CNN: two kernel-3 blocks and a dense 64
/// layer; LSTM: one hidden-64 layer feeding the head; MLP: two dense 64 layers).
ModelSpec default_spec(Architecture arch);

struct ForwardContext {
    bool stochastic = false;  // draw dropout masks
    Rng* rng = nullptr;
};

/// Encoded model input. Windows are row-major [size, seq_len, slots].
struct Batch {
    std::size_t size = 0;
    std::size_t seq_len = 0;
    std::size_t n_cat = 0;
    std::size_t n_num = 0;
    std::vector<std::int32_t> categorical;
    std::vector<double> numeric;
    std::vector<double> targets;
};

/// Inverted Bernoulli dropout of x: kept units scaled by 1/(1-p). Identity
/// when p == 0 or outside training.
ad::Var bernoulli_dropout(ad::Var x, double p, bool training, Rng& rng);

/// Relaxed drop indicator z = sigmoid((logit p + log u - log(1-u)) / t).
/// Note logit(sigmoid(p_logit)) == p_logit, which keeps this exact.
ad::Var concrete_drop_indicator(ad::Var p_logit, std::span<const double> uniforms, double temperature);

/// x * (1 - z) / (1 - p) with the given uniform draws (one per element of x).
ad::Var concrete_dropout(ad::Var x, ad::Var p_logit, double temperature, std::span<const double> uniforms);
ad::Var concrete_dropout(ad::Var x, ad::Var p_logit, double temperature, Rng& rng);

/// Draws n uniforms in (0,1), clamped away from the endpoints.
std::vector<double> draw_uniforms(std::size_t n, Rng& rng);

/// Dropout policy for one layer's weights.
class WeightDropout {
public:
    WeightDropout() = default;
    WeightDropout(DropoutMode mode, double fixed_p, double init_p, double temperature);

    DropoutMode mode() const { return mode_; }
    double temperature() const { return temperature_; }
    /// Current dropout probability.
    double probability() const;

    ad::Tensor& p_logit() { return p_logit_; }
    const ad::Tensor& p_logit() const { return p_logit_; }

    /// Scaled mask for a weight of the given shape; invalid Var when no mask applies.
    ad::Var sample_mask(ad::Graph& g, ad::Shape shape, const ForwardContext& ctx) const;
    /// weight, masked when ctx.stochastic and the mode is not none.
    ad::Var apply(ad::Graph& g, ad::Var weight, const ForwardContext& ctx) const;

private:
    DropoutMode mode_ = DropoutMode::none;
    double fixed_p_ = 0.0;
    double temperature_ = 0.1;
    ad::Tensor p_logit_;
};

struct Dense {
    ad::Tensor weight;  // [in, out]
    ad::Tensor bias;    // [out]
    WeightDropout dropout;

    Dense() = default;
    Dense(std::size_t in, std::size_t out, WeightDropout dropout, Rng& rng);

    std::size_t in() const { return weight.shape[0]; }
    std::size_t out() const { return weight.shape[1]; }
    ad::Var forward(ad::Graph& g, ad::Var x, const ForwardContext& ctx) const;
};

struct ConvBlock {
    ad::Tensor kernel;  // [width, in_channels, out_channels]
    ad::Tensor bias;    // [out_channels]
    WeightDropout dropout;

    ConvBlock() = default;
    ConvBlock(std::size_t width, std::size_t in_channels, std::size_t out_channels, WeightDropout dropout,
              Rng& rng);
};

/// Cross-correlation with a (possibly dropped) kernel, then rectifier.
ad::Var conv1d_block(ad::Graph& g, ad::Var x, const ConvBlock& block, const ForwardContext& ctx);

/// Gate order for the LSTM arrays: input, forget, cell candidate, output.
struct LstmParams {
    std::array<ad::Tensor, 4> input_weights;      // [in, hidden]
    std::array<ad::Tensor, 4> recurrent_weights;  // [hidden, hidden]
    std::array<ad::Tensor, 4> biases;             // [hidden]
    WeightDropout dropout;

    LstmParams() = default;
    LstmParams(std::size_t in, std::size_t hidden, WeightDropout dropout, Rng& rng);

    std::size_t in() const { return input_weights[0].shape[0]; }
    std::size_t hidden() const { return input_weights[0].shape[1]; }
};

/// One scaled mask per weight matrix (4 input, then 4 recurrent), drawn once
/// per sequence. Invalid entries mean "no dropout".
struct LstmMasks {
    std::array<ad::Var, 8> masks;
};

LstmMasks sample_lstm_masks(ad::Graph& g, const LstmParams& params, const ForwardContext& ctx);

/// One step of the LSTM with every weight matrix multiplied by its mask.
std::pair<ad::Var, ad::Var> lstm_cell_variational(ad::Var x_t, ad::Var h_prev, ad::Var c_prev,
                                                  const LstmParams& params, const LstmMasks& masks);

/// Runs the cell over x [B, L, in] from zero state; returns the last hidden
/// state. When `trace` is given, the masks used at each step are appended.
ad::Var lstm_sequence(ad::Graph& g, ad::Var x, const LstmParams& params, const ForwardContext& ctx,
                      std::vector<LstmMasks>* trace = nullptr);

struct HeadOutput {
    ad::Var mean;          // [B]
    ad::Var log_variance;  // [B]; invalid when homoscedastic
};

/// Affine map from the network's standardized output to target units.
struct OutputScale {
    double shift = 0.0;
    double scale = 1.0;
};

/// Final dense layer with one column for the mean and, when heteroscedastic,
/// a second for the log-variance.
ad::Var head_projection(ad::Graph& g, ad::Var features, const Dense& head, const ForwardContext& ctx);
HeadOutput hetero_head(ad::Graph& g, ad::Var features, const Dense& head, const ForwardContext& ctx,
                       const OutputScale& scale = {});

/// Per-timestep concatenation of embeddings and numerics: [B, L, C].
ad::Var embed_and_stack(ad::Graph& g, const Batch& batch, std::span<const ad::Tensor> embeddings);

}  // namespace remtime::nn
