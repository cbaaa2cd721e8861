#include "remtime/model.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "remtime/errors.hpp"

namespace remtime::nn {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

json spec_to_json(const ModelSpec& s) {
    return json{{"arch", to_string(s.arch)},
                {"vocab_sizes", s.vocab_sizes},
                {"embedding_dims", s.embedding_dims},
                {"numeric_features", s.numeric_features},
                {"sequence_length", s.sequence_length},
                {"conv_channels", s.conv_channels},
                {"kernel_size", s.kernel_size},
                {"dense_units", s.dense_units},
                {"lstm_hidden", s.lstm_hidden},
                {"dropout", to_string(s.dropout)},
                {"dropout_p", s.dropout_p},
                {"concrete_init_p", s.concrete_init_p},
                {"temperature", s.temperature},
                {"length_scale", s.length_scale},
                {"heteroscedastic", s.heteroscedastic}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    s.arch = parse_architecture(j.at("arch").get<std::string>());
    s.vocab_sizes = j.at("vocab_sizes").get<std::vector<std::size_t>>();
    s.embedding_dims = j.at("embedding_dims").get<std::vector<std::size_t>>();
    s.numeric_features = j.at("numeric_features").get<std::size_t>();
    s.sequence_length = j.at("sequence_length").get<std::size_t>();
    s.conv_channels = j.at("conv_channels").get<std::vector<std::size_t>>();
    s.kernel_size = j.at("kernel_size").get<std::size_t>();
    s.dense_units = j.at("dense_units").get<std::vector<std::size_t>>();
    s.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
    s.dropout = parse_dropout_mode(j.at("dropout").get<std::string>());
    s.dropout_p = j.at("dropout_p").get<double>();
    s.concrete_init_p = j.at("concrete_init_p").get<double>();
    s.temperature = j.at("temperature").get<double>();
    s.length_scale = j.at("length_scale").get<double>();
    s.heteroscedastic = j.at("heteroscedastic").get<bool>();
    return s;
}

}  // namespace

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    Rng rng = make_rng(seed);

    for (std::size_t j = 0; j < spec_.vocab_sizes.size(); ++j) {
        ad::Tensor table(ad::Shape{spec_.vocab_sizes[j], spec_.embedding_dims[j]});
        std::uniform_real_distribution<double> dist(-0.5, 0.5);
        for (std::size_t i = spec_.embedding_dims[j]; i < table.values.size(); ++i) table.values[i] = dist(rng);
        table.requires_grad = true;
        embeddings_.push_back(std::move(table));
    }

    std::size_t features = 0;
    const std::size_t channels = spec_.input_channels();
    switch (spec_.arch) {
        case Architecture::cnn: {
            std::size_t in = channels;
            std::size_t len = spec_.sequence_length;
            for (auto out : spec_.conv_channels) {
                if (spec_.kernel_size > len) {
                    throw DimensionError("layers", "kernel width " + std::to_string(spec_.kernel_size) +
                                                       " exceeds remaining sequence length " + std::to_string(len));
                }
                conv_.emplace_back(spec_.kernel_size, in, out, make_dropout(), rng);
                len -= spec_.kernel_size - 1;
                in = out;
            }
            features = len * in;
            break;
        }
        case Architecture::lstm:
            lstm_ = LstmParams(channels, spec_.lstm_hidden, make_dropout(), rng);
            features = spec_.lstm_hidden;
            break;
        case Architecture::mlp:
            features = spec_.sequence_length * channels;
            break;
    }
    for (auto units : spec_.dense_units) {
        dense_.emplace_back(features, units, make_dropout(), rng);
        features = units;
    }
    head_ = Dense(features, spec_.heteroscedastic ? 2 : 1, make_dropout(), rng);
}

WeightDropout Model::make_dropout() const {
    return WeightDropout(spec_.dropout, spec_.dropout == DropoutMode::fixed ? spec_.dropout_p : 0.0,
                         spec_.concrete_init_p, spec_.temperature);
}

HeadOutput Model::forward(ad::Graph& g, const Batch& batch, const ForwardContext& ctx) const {
    if (batch.seq_len != spec_.sequence_length || batch.n_cat != spec_.vocab_sizes.size() ||
        batch.n_num != spec_.numeric_features) {
        throw ContractError("inference", "batch layout (seq " + std::to_string(batch.seq_len) + ", cat " +
                                             std::to_string(batch.n_cat) + ", num " + std::to_string(batch.n_num) +
                                             ") does not match the model spec");
    }
    ad::Var x = embed_and_stack(g, batch, embeddings_);
    switch (spec_.arch) {
        case Architecture::cnn:
            for (const auto& block : conv_) x = conv1d_block(g, x, block, ctx);
            break;
        case Architecture::lstm:
            x = lstm_sequence(g, x, lstm_, ctx);
            break;
        case Architecture::mlp:
            break;
    }
    const std::size_t width = x.size() / batch.size;
    x = ad::reshape(x, ad::Shape{batch.size, width});
    for (const auto& layer : dense_) x = ad::relu(layer.forward(g, x, ctx));
    return hetero_head(g, x, head_, ctx, output_scale);
}

std::vector<ad::NamedTensor> Model::named_parameters() {
    std::vector<ad::NamedTensor> out;
    for (std::size_t j = 0; j < embeddings_.size(); ++j) out.emplace_back("embedding." + std::to_string(j), &embeddings_[j]);
    auto add_dropout = [&](const std::string& prefix, WeightDropout& d) {
        if (d.mode() == DropoutMode::concrete) out.emplace_back(prefix + ".p_logit", &d.p_logit());
    };
    for (std::size_t i = 0; i < conv_.size(); ++i) {
        const std::string p = "conv." + std::to_string(i);
        out.emplace_back(p + ".kernel", &conv_[i].kernel);
        out.emplace_back(p + ".bias", &conv_[i].bias);
        add_dropout(p, conv_[i].dropout);
    }
    if (spec_.arch == Architecture::lstm) {
        static const char* gates[] = {"i", "f", "g", "o"};
        for (std::size_t k = 0; k < 4; ++k) {
            out.emplace_back(std::string("lstm.w_") + gates[k], &lstm_.input_weights[k]);
            out.emplace_back(std::string("lstm.u_") + gates[k], &lstm_.recurrent_weights[k]);
            out.emplace_back(std::string("lstm.b_") + gates[k], &lstm_.biases[k]);
        }
        add_dropout("lstm", lstm_.dropout);
    }
    for (std::size_t i = 0; i < dense_.size(); ++i) {
        const std::string p = "dense." + std::to_string(i);
        out.emplace_back(p + ".weight", &dense_[i].weight);
        out.emplace_back(p + ".bias", &dense_[i].bias);
        add_dropout(p, dense_[i].dropout);
    }
    out.emplace_back("head.weight", &head_.weight);
    out.emplace_back("head.bias", &head_.bias);
    add_dropout("head", head_.dropout);
    return out;
}

std::vector<ad::Tensor*> Model::parameters() {
    std::vector<ad::Tensor*> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::vector<DropoutSite> Model::dropout_sites() const {
    std::vector<DropoutSite> out;
    if (spec_.dropout == DropoutMode::none) return out;
    for (const auto& block : conv_) {
        out.push_back({&block.kernel, block.kernel.shape[0] * block.kernel.shape[1], &block.dropout});
    }
    if (spec_.arch == Architecture::lstm) {
        for (std::size_t k = 0; k < 4; ++k) out.push_back({&lstm_.input_weights[k], lstm_.in(), &lstm_.dropout});
        for (std::size_t k = 0; k < 4; ++k) {
            out.push_back({&lstm_.recurrent_weights[k], lstm_.hidden(), &lstm_.dropout});
        }
    }
    for (const auto& layer : dense_) out.push_back({&layer.weight, layer.in(), &layer.dropout});
    out.push_back({&head_.weight, head_.in(), &head_.dropout});
    return out;
}

std::vector<double> Model::dropout_probabilities() const {
    std::vector<double> out;
    if (spec_.dropout == DropoutMode::none) return out;
    for (const auto& block : conv_) out.push_back(block.dropout.probability());
    if (spec_.arch == Architecture::lstm) out.push_back(lstm_.dropout.probability());
    for (const auto& layer : dense_) out.push_back(layer.dropout.probability());
    out.push_back(head_.dropout.probability());
    return out;
}

std::string Model::to_json() const {
    json tensors = json::object();
    for (auto& [name, t] : const_cast<Model*>(this)->named_parameters()) {
        tensors[name] = {{"shape", t->shape}, {"values", t->values}};
    }
    json j{{"format", "remtime-checkpoint"},
           {"version", kCheckpointVersion},
           {"model_spec", spec_to_json(spec_)},
           {"output_scale", {{"shift", output_scale.shift}, {"scale", output_scale.scale}}},
           {"tensors", tensors}};
    return j.dump();
}

Model Model::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError("layers", std::string("malformed checkpoint: ") + e.what());
    }
    if (j.value("format", "") != "remtime-checkpoint") throw IoError("layers", "not a checkpoint file");
    if (j.value("version", 0) != kCheckpointVersion) throw IoError("layers", "unsupported checkpoint version");
    Model m(spec_from_json(j.at("model_spec")), 0);
    m.output_scale.shift = j.at("output_scale").at("shift").get<double>();
    m.output_scale.scale = j.at("output_scale").at("scale").get<double>();
    const json& tensors = j.at("tensors");
    for (auto& [name, t] : m.named_parameters()) {
        if (!tensors.contains(name)) throw IoError("layers", "checkpoint lacks tensor '" + name + "'");
        const json& tj = tensors.at(name);
        if (tj.at("shape").get<ad::Shape>() != t->shape) {
            throw IoError("layers", "checkpoint tensor '" + name + "' has the wrong shape");
        }
        t->values = tj.at("values").get<std::vector<double>>();
        if (t->values.size() != ad::shape_size(t->shape)) {
            throw IoError("layers", "checkpoint tensor '" + name + "' has the wrong size");
        }
    }
    return m;
}

void Model::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("layers", "cannot write " + path.string());
    out << to_json() << '\n';
}

Model Model::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("layers", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

ModelSpec spec_for(const eventlog::EncodedLog& log, ModelSpec base, std::size_t embedding_dim) {
    base.vocab_sizes = log.vocabulary_sizes();
    base.embedding_dims.assign(base.vocab_sizes.size(), embedding_dim);
    base.numeric_features = log.numeric_slots();
    base.sequence_length = log.schema.sequence_length;
    return base;
}

Batch make_batch(const eventlog::EncodedLog& log, std::span<const std::size_t> indices) {
    Batch b;
    b.size = indices.size();
    b.seq_len = log.schema.sequence_length;
    b.n_cat = log.categorical_slots();
    b.n_num = log.numeric_slots();
    b.categorical.reserve(b.size * b.seq_len * b.n_cat);
    b.numeric.reserve(b.size * b.seq_len * b.n_num);
    b.targets.reserve(b.size);
    for (auto i : indices) {
        const auto& rec = log.prefixes.at(i);
        b.categorical.insert(b.categorical.end(), rec.categorical.begin(), rec.categorical.end());
        b.numeric.insert(b.numeric.end(), rec.numeric.begin(), rec.numeric.end());
        b.targets.push_back(rec.target);
    }
    return b;
}

Batch make_batch(const eventlog::EncodedLog& log) {
    std::vector<std::size_t> all(log.prefixes.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return make_batch(log, all);
}

Batch slice_batch(const Batch& batch, std::size_t begin, std::size_t end) {
    if (begin > end || end > batch.size) throw ContractError("layers", "batch slice out of range");
    Batch b;
    b.size = end - begin;
    b.seq_len = batch.seq_len;
    b.n_cat = batch.n_cat;
    b.n_num = batch.n_num;
    const std::size_t cat_row = batch.seq_len * batch.n_cat, num_row = batch.seq_len * batch.n_num;
    b.categorical.assign(batch.categorical.begin() + static_cast<std::ptrdiff_t>(begin * cat_row),
                         batch.categorical.begin() + static_cast<std::ptrdiff_t>(end * cat_row));
    b.numeric.assign(batch.numeric.begin() + static_cast<std::ptrdiff_t>(begin * num_row),
                     batch.numeric.begin() + static_cast<std::ptrdiff_t>(end * num_row));
    if (!batch.targets.empty()) {
        b.targets.assign(batch.targets.begin() + static_cast<std::ptrdiff_t>(begin),
                         batch.targets.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return b;
}

}  // namespace remtime::nn

namespace remtime::nn {

Batch gather_batch(const Batch& batch, std::span<const std::size_t> rows) {
    Batch b;
    b.size = rows.size();
    b.seq_len = batch.seq_len;
    b.n_cat = batch.n_cat;
    b.n_num = batch.n_num;
    const std::size_t cat_row = batch.seq_len * batch.n_cat, num_row = batch.seq_len * batch.n_num;
    b.categorical.reserve(b.size * cat_row);
    b.numeric.reserve(b.size * num_row);
    for (auto r : rows) {
        if (r >= batch.size) throw ContractError("layers", "batch row out of range");
        b.categorical.insert(b.categorical.end(), batch.categorical.begin() + static_cast<std::ptrdiff_t>(r * cat_row),
                             batch.categorical.begin() + static_cast<std::ptrdiff_t>((r + 1) * cat_row));
        b.numeric.insert(b.numeric.end(), batch.numeric.begin() + static_cast<std::ptrdiff_t>(r * num_row),
                         batch.numeric.begin() + static_cast<std::ptrdiff_t>((r + 1) * num_row));
        if (!batch.targets.empty()) b.targets.push_back(batch.targets[r]);
    }
    return b;
}

}  // namespace remtime::nn
