#pragma once

#include <span>

#include "remtime/autodiff.hpp"
#include "remtime/layers.hpp"
#include "remtime/model.hpp"

namespace remtime::losses {

struct LossBreakdown {
    double data_term = 0.0;
    double weight_reg_term = 0.0;
    double dropout_entropy_term = 0.0;
    double total = 0.0;  // data + weight_reg + entropy, summed in that order
};

/// Mean absolute error. Throws ContractError on empty or mismatched input.
double mae(std::span<const double> pred, std::span<const double> target);

/// mean_n [ 0.5 * exp(-s_n) * (y_n - mu_n)^2 + 0.5 * s_n ]. A homoscedastic
/// head (no log-variance) is treated as s_n = 0, i.e. half the squared error.
ad::Var hetero_nll(const nn::HeadOutput& out, ad::Var target);

struct RegularizerTerms {
    ad::Var weight_term;   // sum_l (l^2 / N) ||W_l||^2 / (1 - p_l)
    ad::Var entropy_term;  // sum_l (K_l / N) (p log p + (1-p) log(1-p))
};

/// Dropout part of the variational objective. With no sites both terms are 0.
RegularizerTerms dropout_regularizer(ad::Graph& g, std::span<const nn::DropoutSite> sites, double n_train,
                                     double length_scale);

struct Objective {
    ad::Var total;
    ad::Var data_term;
    RegularizerTerms reg;

    LossBreakdown breakdown() const;
};

/// Data term plus regularizer, assembled as (data + weight) + entropy.
Objective training_objective(ad::Graph& g, const nn::HeadOutput& out, ad::Var target,
                             std::span<const nn::DropoutSite> sites, double n_train, double length_scale);

}  // namespace remtime::losses
