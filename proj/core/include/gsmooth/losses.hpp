#pragma once

#include <gsmooth/autodiff.hpp>
#include <gsmooth/graph.hpp>

#include <span>
#include <string_view>
#include <vector>

namespace gsmooth {

enum class SmoothVariant { l2, cross_entropy };

std::string_view to_string(SmoothVariant variant);
SmoothVariant parse_smooth_variant(std::string_view name);

struct LossConfig {
    double mu = 1.0;  // weight of the smoothness term
    SmoothVariant variant = SmoothVariant::cross_entropy;
    /// Whether the diagonal (i == j) pairs of Â enter the smoothness sum.
    /// They contribute nothing to the L2 variant but do to cross-entropy.
    bool include_self_loops = true;

    void validate() const;
};

/// n x c one-hot rows for the given class ids.
Matrix one_hot(std::span<const int> labels, std::size_t n_classes);

/// Row-wise softmax of logits.
ad::Tensor softmax_predictions(const ad::Tensor& logits);

/// -Σ_{i∈labeled} y_i · log z_i with log clamped at 1e-12. Sum reduction.
ad::Tensor ce_fit(const ad::Tensor& z, const Matrix& y, std::span<const NodeId> labeled);

/// Σ_{i∈labeled} ‖z_i - y_i‖².
ad::Tensor l2_fit(const ad::Tensor& z, const Matrix& y, std::span<const NodeId> labeled);

/// Σ over ordered pairs with Â_ij ≠ 0 of Â_ij ‖z_i - z_j‖².
ad::Tensor l2_smooth(const ad::Tensor& z, const NormalizedAdjacency& a_hat, bool include_self_loops = true);

/// Indicator of each row's maximum; ties go to the lowest column.
Matrix one_hot_argmax(const Matrix& z);

/// -Σ over ordered pairs with Â_ij ≠ 0 of Â_ij φ(z_i) · log z_j. φ(z) is
/// recomputed from `z` and treated as a constant.
ad::Tensor ce_smooth(const ad::Tensor& z, const NormalizedAdjacency& a_hat, bool include_self_loops = true);

/// Same as ce_smooth but with caller-supplied constant targets φ.
ad::Tensor ce_smooth_with_targets(const ad::Tensor& z, const Matrix& targets, const NormalizedAdjacency& a_hat,
                                  bool include_self_loops = true);

/// tr(Zᵀ (I - Â) Z), which equals ½ Σ_ij Ã_ij ‖z_i/√d_i - z_j/√d_j‖² for the
/// self-looped graph Ã with degrees d.
ad::Tensor normalized_l2_smooth(const ad::Tensor& z, const NormalizedAdjacency& a_hat);

/// Σ_i ‖z_i - y_i‖² over all rows (y zero on unlabeled rows) plus
/// mu · normalized_l2_smooth. Its minimizer is the diffusion solution with
/// γ = 1 / (1 + mu).
ad::Tensor normalized_l2_objective(const ad::Tensor& z, const Matrix& y, const NormalizedAdjacency& a_hat, double mu);

struct LossTerms {
    ad::Tensor fit;
    ad::Tensor smooth;  // undefined when mu == 0
    ad::Tensor total;
};

/// fit + mu · smooth on probabilities z. With mu == 0 the total is the fit term.
LossTerms combined_loss_terms(const ad::Tensor& z, const Matrix& y, std::span<const NodeId> labeled,
                              const NormalizedAdjacency& a_hat, const LossConfig& cfg);
ad::Tensor combined_loss(const ad::Tensor& z, const Matrix& y, std::span<const NodeId> labeled,
                         const NormalizedAdjacency& a_hat, const LossConfig& cfg);

} // namespace gsmooth
