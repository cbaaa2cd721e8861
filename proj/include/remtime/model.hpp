#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "remtime/eventlog.hpp"
#include "remtime/layers.hpp"

namespace remtime::nn {

/// A weight matrix under dropout, as seen by the regularizer.
struct DropoutSite {
    const ad::Tensor* weight = nullptr;
    std::size_t input_dim = 0;
    const WeightDropout* dropout = nullptr;
};

/// Embedding -> (conv blocks | LSTM | nothing) -> dense stack -> head.
class Model {
public:
    Model() = default;
    Model(ModelSpec spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }

    HeadOutput forward(ad::Graph& g, const Batch& batch, const ForwardContext& ctx) const;

    std::vector<ad::Tensor*> parameters();
    std::vector<ad::NamedTensor> named_parameters();
    std::vector<DropoutSite> dropout_sites() const;
    /// Current dropout probability of every layer carrying dropout.
    std::vector<double> dropout_probabilities() const;

    OutputScale output_scale;

    std::string to_json() const;
    static Model from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static Model load(const std::filesystem::path& path);

private:
    WeightDropout make_dropout() const;

    ModelSpec spec_;
    std::vector<ad::Tensor> embeddings_;
    std::vector<ConvBlock> conv_;
    LstmParams lstm_;
    std::vector<Dense> dense_;
    Dense head_;
};

/// Model spec whose input description matches an encoded log.
ModelSpec spec_for(const eventlog::EncodedLog& log, ModelSpec base, std::size_t embedding_dim);

Batch make_batch(const eventlog::EncodedLog& log, std::span<const std::size_t> indices);
Batch make_batch(const eventlog::EncodedLog& log);
/// Rows [begin, end) of a batch.
Batch slice_batch(const Batch& batch, std::size_t begin, std::size_t end);

}  // namespace remtime::nn

namespace remtime::nn {

/// Selected rows of a batch, in the given order.
Batch gather_batch(const Batch& batch, std::span<const std::size_t> rows);

}  // namespace remtime::nn
