#include "remtime/losses.hpp"

#include <cmath>

#include "remtime/errors.hpp"

namespace remtime::losses {

double mae(std::span<const double> pred, std::span<const double> target) {
    if (pred.empty()) throw ContractError("losses", "mae of an empty batch");
    if (pred.size() != target.size()) throw ContractError("losses", "mae: prediction/target length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

ad::Var hetero_nll(const nn::HeadOutput& out, ad::Var target) {
    if (out.mean.shape() != target.shape()) {
        throw DimensionError("losses", "hetero_nll: mean " + ad::shape_str(out.mean.shape()) + " vs target " +
                                           ad::shape_str(target.shape()));
    }
    ad::Var sq = ad::square(ad::sub(target, out.mean));
    if (!out.log_variance.valid()) return ad::mean(ad::scale(sq, 0.5));
    const ad::Var& s = out.log_variance;
    ad::Var weighted = ad::mul(ad::exp(ad::scale(s, -1.0)), sq);
    return ad::mean(ad::add(ad::scale(weighted, 0.5), ad::scale(s, 0.5)));
}

RegularizerTerms dropout_regularizer(ad::Graph& g, std::span<const nn::DropoutSite> sites, double n_train,
                                     double length_scale) {
    if (!(n_train >= 1.0)) throw ContractError("losses", "regularizer needs N >= 1");
    if (!(length_scale > 0.0)) throw ContractError("losses", "regularizer needs a positive length-scale");
    const double weight_coef = length_scale * length_scale / n_train;

    std::vector<ad::Var> weight_parts, entropy_parts;
    for (const auto& site : sites) {
        const nn::WeightDropout& d = *site.dropout;
        if (d.mode() == nn::DropoutMode::none) continue;
        ad::Var sq_norm = ad::sum(ad::square(g.parameter(*site.weight)));
        const double k_coef = static_cast<double>(site.input_dim) / n_train;
        if (d.mode() == nn::DropoutMode::fixed) {
            const double p = d.probability();
            weight_parts.push_back(ad::scale(sq_norm, weight_coef / (1.0 - p)));
            const double ent = p > 0.0 ? p * std::log(p) + (1.0 - p) * std::log1p(-p) : 0.0;
            entropy_parts.push_back(g.constant(ad::Tensor::scalar(k_coef * ent)));
            continue;
        }
        ad::Var l = g.parameter(d.p_logit());
        // 1 / (1 - p) == 1 + exp(l)
        ad::Var inv_keep = ad::add_const(ad::exp(l), 1.0);
        weight_parts.push_back(ad::scale(ad::mul(sq_norm, inv_keep), weight_coef));
        ad::Var p = ad::sigmoid(l);
        ad::Var q = ad::sigmoid(ad::scale(l, -1.0));
        ad::Var ent = ad::add(ad::mul(p, ad::log(p)), ad::mul(q, ad::log(q)));
        entropy_parts.push_back(ad::scale(ent, k_coef));
    }
    auto total = [&g](const std::vector<ad::Var>& parts) {
        if (parts.empty()) return g.constant(ad::Tensor::scalar(0.0));
        ad::Var acc = parts[0];
        for (std::size_t i = 1; i < parts.size(); ++i) acc = ad::add(acc, parts[i]);
        return acc;
    };
    return {total(weight_parts), total(entropy_parts)};
}

LossBreakdown Objective::breakdown() const {
    LossBreakdown b;
    b.data_term = data_term.item();
    b.weight_reg_term = reg.weight_term.item();
    b.dropout_entropy_term = reg.entropy_term.item();
    b.total = total.item();
    return b;
}

Objective training_objective(ad::Graph& g, const nn::HeadOutput& out, ad::Var target,
                             std::span<const nn::DropoutSite> sites, double n_train, double length_scale) {
    Objective o;
    o.data_term = hetero_nll(out, target);
    o.reg = dropout_regularizer(g, sites, n_train, length_scale);
    o.total = ad::add(ad::add(o.data_term, o.reg.weight_term), o.reg.entropy_term);
    return o;
}

}  // namespace remtime::losses
