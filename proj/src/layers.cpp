#include "remtime/layers.hpp"

#include <algorithm>
#include <cmath>

#include "remtime/errors.hpp"

namespace remtime::nn {

namespace {

constexpr double kUniformEps = 1e-7;

double logit(double p) { return std::log(p) - std::log1p(-p); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

ad::Tensor uniform_tensor(ad::Shape shape, double bound, Rng& rng) {
    ad::Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.values) v = dist(rng);
    t.requires_grad = true;
    return t;
}

ad::Tensor zero_param(ad::Shape shape, double fill = 0.0) {
    ad::Tensor t(std::move(shape), fill);
    t.requires_grad = true;
    return t;
}

}  // namespace

std::string to_string(Architecture a) {
    switch (a) {
        case Architecture::cnn: return "cnn";
        case Architecture::lstm: return "lstm";
        case Architecture::mlp: return "mlp";
    }
    return "cnn";
}

std::string to_string(DropoutMode m) {
    switch (m) {
        case DropoutMode::none: return "none";
        case DropoutMode::fixed: return "fixed";
        case DropoutMode::concrete: return "concrete";
    }
    return "none";
}

Architecture parse_architecture(const std::string& s) {
    if (s == "cnn") return Architecture::cnn;
    if (s == "lstm") return Architecture::lstm;
    if (s == "mlp") return Architecture::mlp;
    throw ParameterError("layers", "unknown architecture '" + s + "'");
}

DropoutMode parse_dropout_mode(const std::string& s) {
    if (s == "none") return DropoutMode::none;
    if (s == "fixed") return DropoutMode::fixed;
    if (s == "concrete") return DropoutMode::concrete;
    throw ParameterError("layers", "unknown dropout mode '" + s + "'");
}

std::size_t ModelSpec::input_channels() const {
    std::size_t c = numeric_features;
    for (auto d : embedding_dims) c += d;
    return c;
}

void ModelSpec::validate() const {
    if (vocab_sizes.size() != embedding_dims.size()) {
        throw ParameterError("layers", "one embedding dimension per categorical feature required");
    }
    for (auto v : vocab_sizes)
        if (v < 2) throw ParameterError("layers", "vocabulary size must be >= 2");
    for (auto d : embedding_dims)
        if (d == 0) throw ParameterError("layers", "embedding dimension must be positive");
    if (sequence_length == 0) throw ParameterError("layers", "sequence_length must be positive");
    if (input_channels() == 0) throw ParameterError("layers", "model has no input features");
    for (auto c : conv_channels)
        if (c == 0) throw ParameterError("layers", "conv channel counts must be positive");
    for (auto u : dense_units)
        if (u == 0) throw ParameterError("layers", "dense widths must be positive");
    if (kernel_size == 0) throw ParameterError("layers", "kernel_size must be positive");
    if (lstm_hidden == 0) throw ParameterError("layers", "lstm_hidden must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ParameterError("layers", "fixed dropout p must lie in [0, 1)");
    if (!(concrete_init_p > 0.0 && concrete_init_p < 1.0)) {
        throw ParameterError("layers", "concrete initial p must lie in (0, 1)");
    }
    if (!(temperature > 0.0)) throw ParameterError("layers", "temperature must be positive");
    if (!(length_scale > 0.0)) throw ParameterError("layers", "length_scale must be positive");
}

ModelSpec default_spec(Architecture arch) {
    ModelSpec s;
    s.arch = arch;
    switch (arch) {
        case Architecture::cnn:
            s.conv_channels = {32, 32};
            s.kernel_size = 3;
            s.dense_units = {64};
            break;
        case Architecture::lstm:
            s.conv_channels = {};
            s.lstm_hidden = 64;
            s.dense_units = {};
            break;
        case Architecture::mlp:
            s.conv_channels = {};
            s.dense_units = {64, 64};
            break;
    }
    return s;
}

std::vector<double> draw_uniforms(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> u(n);
    for (auto& v : u) v = std::clamp(dist(rng), kUniformEps, 1.0 - kUniformEps);
    return u;
}

ad::Var bernoulli_dropout(ad::Var x, double p, bool training, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ParameterError("layers", "dropout probability must lie in [0, 1)");
    if (!training || p == 0.0) return x;
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(x.size());
    for (auto& m : mask) m = dist(rng) < p ? 0.0 : keep_scale;
    return ad::mul(x, x.graph().constant(x.shape(), std::move(mask)));
}

ad::Var concrete_drop_indicator(ad::Var p_logit, std::span<const double> uniforms, double temperature) {
    if (!(temperature > 0.0)) throw ParameterError("layers", "temperature must be positive");
    std::vector<double> noise(uniforms.size());
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = std::log(uniforms[i]) - std::log1p(-uniforms[i]);
    ad::Graph& g = p_logit.graph();
    const std::size_t n = noise.size();
    ad::Var shifted = ad::add_scalar(g.constant(ad::Shape{n}, std::move(noise)), p_logit);
    return ad::sigmoid(ad::scale(shifted, 1.0 / temperature));
}

namespace {

/// (1 - z) / (1 - p), shaped like the weight it scales.
ad::Var concrete_scaled_mask(ad::Var p_logit, std::span<const double> uniforms, double temperature,
                             ad::Shape shape) {
    ad::Var z = concrete_drop_indicator(p_logit, uniforms, temperature);
    ad::Var keep = ad::add_const(ad::scale(z, -1.0), 1.0);
    // 1 / (1 - sigmoid(l)) == 1 + exp(l)
    ad::Var inv_keep_prob = ad::add_const(ad::exp(p_logit), 1.0);
    return ad::reshape(ad::mul_scalar(keep, inv_keep_prob), shape);
}

}  // namespace

ad::Var concrete_dropout(ad::Var x, ad::Var p_logit, double temperature, std::span<const double> uniforms) {
    if (uniforms.size() != x.size()) {
        throw DimensionError("layers", "concrete_dropout: one uniform draw per element required");
    }
    return ad::mul(x, concrete_scaled_mask(p_logit, uniforms, temperature, x.shape()));
}

ad::Var concrete_dropout(ad::Var x, ad::Var p_logit, double temperature, Rng& rng) {
    const auto u = draw_uniforms(x.size(), rng);
    return concrete_dropout(x, p_logit, temperature, u);
}

WeightDropout::WeightDropout(DropoutMode mode, double fixed_p, double init_p, double temperature)
    : mode_(mode), fixed_p_(fixed_p), temperature_(temperature) {
    if (!(fixed_p >= 0.0 && fixed_p < 1.0)) throw ParameterError("layers", "dropout probability must lie in [0, 1)");
    if (!(temperature > 0.0)) throw ParameterError("layers", "temperature must be positive");
    if (mode == DropoutMode::concrete) {
        if (!(init_p > 0.0 && init_p < 1.0)) throw ParameterError("layers", "initial p must lie in (0, 1)");
        p_logit_ = ad::Tensor::scalar(logit(init_p));
        p_logit_.requires_grad = true;
    }
}

double WeightDropout::probability() const {
    switch (mode_) {
        case DropoutMode::none: return 0.0;
        case DropoutMode::fixed: return fixed_p_;
        case DropoutMode::concrete: return sigmoid(p_logit_.values[0]);
    }
    return 0.0;
}

ad::Var WeightDropout::sample_mask(ad::Graph& g, ad::Shape shape, const ForwardContext& ctx) const {
    if (!ctx.stochastic || mode_ == DropoutMode::none) return {};
    if (ctx.rng == nullptr) throw ContractError("layers", "stochastic forward pass without a random stream");
    const std::size_t n = ad::shape_size(shape);
    if (mode_ == DropoutMode::fixed) {
        if (fixed_p_ == 0.0) return {};
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        const double keep_scale = 1.0 / (1.0 - fixed_p_);
        std::vector<double> mask(n);
        for (auto& m : mask) m = dist(*ctx.rng) < fixed_p_ ? 0.0 : keep_scale;
        return g.constant(shape, std::move(mask));
    }
    const auto u = draw_uniforms(n, *ctx.rng);
    return concrete_scaled_mask(g.parameter(p_logit_), u, temperature_, shape);
}

ad::Var WeightDropout::apply(ad::Graph& g, ad::Var weight, const ForwardContext& ctx) const {
    ad::Var mask = sample_mask(g, weight.shape(), ctx);
    return mask.valid() ? ad::mul(weight, mask) : weight;
}

Dense::Dense(std::size_t in, std::size_t out, WeightDropout d, Rng& rng)
    : weight(uniform_tensor(ad::Shape{in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng)),
      bias(zero_param(ad::Shape{out})),
      dropout(std::move(d)) {}

ad::Var Dense::forward(ad::Graph& g, ad::Var x, const ForwardContext& ctx) const {
    ad::Var w = dropout.apply(g, g.parameter(weight), ctx);
    return ad::add_bias(ad::matmul(x, w), g.parameter(bias));
}

ConvBlock::ConvBlock(std::size_t width, std::size_t in_channels, std::size_t out_channels, WeightDropout d,
                     Rng& rng)
    : kernel(uniform_tensor(ad::Shape{width, in_channels, out_channels},
                            1.0 / std::sqrt(static_cast<double>(width * in_channels)), rng)),
      bias(zero_param(ad::Shape{out_channels})),
      dropout(std::move(d)) {}

ad::Var conv1d_block(ad::Graph& g, ad::Var x, const ConvBlock& block, const ForwardContext& ctx) {
    ad::Var k = block.dropout.apply(g, g.parameter(block.kernel), ctx);
    return ad::relu(ad::add_bias(ad::conv1d(x, k), g.parameter(block.bias)));
}

LstmParams::LstmParams(std::size_t in, std::size_t hidden, WeightDropout d, Rng& rng) : dropout(std::move(d)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (std::size_t k = 0; k < 4; ++k) {
        input_weights[k] = uniform_tensor(ad::Shape{in, hidden}, bound, rng);
        recurrent_weights[k] = uniform_tensor(ad::Shape{hidden, hidden}, bound, rng);
        biases[k] = zero_param(ad::Shape{hidden}, k == 1 ? 1.0 : 0.0);
    }
}

LstmMasks sample_lstm_masks(ad::Graph& g, const LstmParams& params, const ForwardContext& ctx) {
    LstmMasks m;
    for (std::size_t k = 0; k < 4; ++k) {
        m.masks[k] = params.dropout.sample_mask(g, params.input_weights[k].shape, ctx);
        m.masks[4 + k] = params.dropout.sample_mask(g, params.recurrent_weights[k].shape, ctx);
    }
    return m;
}

std::pair<ad::Var, ad::Var> lstm_cell_variational(ad::Var x_t, ad::Var h_prev, ad::Var c_prev,
                                                  const LstmParams& params, const LstmMasks& masks) {
    ad::Graph& g = x_t.graph();
    auto masked = [&](const ad::Tensor& w, const ad::Var& mask) {
        ad::Var wv = g.parameter(w);
        if (!mask.valid()) return wv;
        if (mask.shape() != w.shape) {
            throw ContractError("layers", "LSTM mask shape " + ad::shape_str(mask.shape()) + " does not match weight " +
                                              ad::shape_str(w.shape));
        }
        return ad::mul(wv, mask);
    };
    std::array<ad::Var, 4> pre;
    for (std::size_t k = 0; k < 4; ++k) {
        ad::Var wx = ad::matmul(x_t, masked(params.input_weights[k], masks.masks[k]));
        ad::Var uh = ad::matmul(h_prev, masked(params.recurrent_weights[k], masks.masks[4 + k]));
        pre[k] = ad::add_bias(ad::add(wx, uh), g.parameter(params.biases[k]));
    }
    ad::Var i = ad::sigmoid(pre[0]);
    ad::Var f = ad::sigmoid(pre[1]);
    ad::Var cand = ad::tanh(pre[2]);
    ad::Var o = ad::sigmoid(pre[3]);
    ad::Var c = ad::add(ad::mul(f, c_prev), ad::mul(i, cand));
    ad::Var h = ad::mul(o, ad::tanh(c));
    return {h, c};
}

ad::Var lstm_sequence(ad::Graph& g, ad::Var x, const LstmParams& params, const ForwardContext& ctx,
                      std::vector<LstmMasks>* trace) {
    if (x.shape().size() != 3 || x.shape()[2] != params.in()) {
        throw DimensionError("layers", "LSTM input " + ad::shape_str(x.shape()) + " vs input width " +
                                           std::to_string(params.in()));
    }
    const std::size_t batch = x.shape()[0], len = x.shape()[1], hidden = params.hidden();
    const LstmMasks masks = sample_lstm_masks(g, params, ctx);
    ad::Var h = g.constant(ad::Tensor(ad::Shape{batch, hidden}));
    ad::Var c = g.constant(ad::Tensor(ad::Shape{batch, hidden}));
    for (std::size_t t = 0; t < len; ++t) {
        if (trace) trace->push_back(masks);
        std::tie(h, c) = lstm_cell_variational(ad::time_step(x, t), h, c, params, masks);
    }
    return h;
}

ad::Var head_projection(ad::Graph& g, ad::Var features, const Dense& head, const ForwardContext& ctx) {
    return head.forward(g, features, ctx);
}

HeadOutput hetero_head(ad::Graph& g, ad::Var features, const Dense& head, const ForwardContext& ctx,
                       const OutputScale& scale) {
    ad::Var raw = head_projection(g, features, head, ctx);
    const std::size_t batch = raw.shape()[0];
    HeadOutput out;
    ad::Var mu = ad::reshape(ad::slice_cols(raw, 0, 1), ad::Shape{batch});
    if (scale.scale != 1.0) mu = ad::scale(mu, scale.scale);
    if (scale.shift != 0.0) mu = ad::add_const(mu, scale.shift);
    out.mean = mu;
    if (head.out() == 2) {
        ad::Var s = ad::reshape(ad::slice_cols(raw, 1, 2), ad::Shape{batch});
        if (scale.scale != 1.0) s = ad::add_const(s, 2.0 * std::log(scale.scale));
        out.log_variance = s;
    }
    return out;
}

ad::Var embed_and_stack(ad::Graph& g, const Batch& batch, std::span<const ad::Tensor> embeddings) {
    if (embeddings.size() != batch.n_cat) {
        throw DimensionError("layers", "batch has " + std::to_string(batch.n_cat) + " categorical slots but " +
                                           std::to_string(embeddings.size()) + " embedding tables");
    }
    const std::size_t rows = batch.size * batch.seq_len;
    std::vector<ad::Var> parts;
    std::vector<std::int32_t> idx(rows);
    for (std::size_t j = 0; j < batch.n_cat; ++j) {
        const std::size_t vocab = embeddings[j].shape[0];
        for (std::size_t r = 0; r < rows; ++r) {
            const std::int32_t v = batch.categorical[r * batch.n_cat + j];
            if (v < 0 || static_cast<std::size_t>(v) >= vocab) {
                throw EncodingError("layers", "categorical index " + std::to_string(v) + " outside vocabulary of " +
                                                  std::to_string(vocab) + " (slot " + std::to_string(j) + ")");
            }
            idx[r] = v;
        }
        parts.push_back(ad::gather_rows(g.parameter(embeddings[j]), idx, 0));
    }
    if (batch.n_num > 0) parts.push_back(g.constant(ad::Shape{rows, batch.n_num}, batch.numeric));
    if (parts.empty()) throw DimensionError("layers", "batch has no features");
    ad::Var stacked = parts.size() == 1 ? parts[0] : ad::concat_cols(parts);
    const std::size_t channels = stacked.shape()[1];
    return ad::reshape(stacked, ad::Shape{batch.size, batch.seq_len, channels});
}

}  // namespace remtime::nn
