#include <gsmooth/errors.hpp>
#include <gsmooth/losses.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace gsmooth {

using ad::Tensor;

std::string_view to_string(SmoothVariant variant) {
    return variant == SmoothVariant::l2 ? "l2" : "cross_entropy";
}

SmoothVariant parse_smooth_variant(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "l2") return SmoothVariant::l2;
    if (lower == "cross_entropy" || lower == "ce" || lower == "cross-entropy") return SmoothVariant::cross_entropy;
    throw InputError("unknown smoothness variant '" + std::string(name) + "' (expected l2 or cross_entropy)");
}

void LossConfig::validate() const {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw InputError("loss config: mu must be finite and >= 0");
}

Matrix one_hot(std::span<const int> labels, std::size_t n_classes) {
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
            throw InputError("one_hot: label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                             " is outside [0, " + std::to_string(n_classes) + ")");
        }
        y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    }
    return y;
}

Tensor softmax_predictions(const Tensor& logits) { return ad::row_softmax(logits); }

namespace {

void check_rows(const Tensor& z, const Matrix& y, std::string_view op) {
    if (z.rows() != y.rows() || z.cols() != y.cols()) {
        throw InputError(std::string(op) + ": predictions are " + std::to_string(z.rows()) + "x" +
                         std::to_string(z.cols()) + " but targets are " + std::to_string(y.rows()) + "x" +
                         std::to_string(y.cols()));
    }
}

// y restricted to the labeled rows, zero elsewhere.
Matrix labeled_mask(const Matrix& y, std::span<const NodeId> labeled, std::string_view op) {
    Matrix masked = Matrix::Zero(y.rows(), y.cols());
    for (NodeId i : labeled) {
        if (static_cast<Eigen::Index>(i) >= y.rows()) {
            throw InputError(std::string(op) + ": labeled index " + std::to_string(i) + " is out of range for " +
                             std::to_string(y.rows()) + " nodes");
        }
        masked.row(i) = y.row(i);
    }
    return masked;
}

Matrix row_indicator(Eigen::Index rows, Eigen::Index cols, std::span<const NodeId> labeled) {
    Matrix ind = Matrix::Zero(rows, cols);
    for (NodeId i : labeled) ind.row(i).setOnes();
    return ind;
}

void check_adjacency(const Tensor& z, const NormalizedAdjacency& a_hat, std::string_view op) {
    if (static_cast<Eigen::Index>(a_hat.n_nodes()) != z.rows()) {
        throw InputError(std::string(op) + ": adjacency has " + std::to_string(a_hat.n_nodes()) +
                         " nodes but predictions have " + std::to_string(z.rows()) + " rows");
    }
}

} // namespace

Tensor ce_fit(const Tensor& z, const Matrix& y, std::span<const NodeId> labeled) {
    check_rows(z, y, "ce_fit");
    const Tensor weights = Tensor::constant(labeled_mask(y, labeled, "ce_fit"));
    return ad::scale(ad::sum(ad::elementwise_mul(weights, ad::log_clamped(z))), -1.0);
}

Tensor l2_fit(const Tensor& z, const Matrix& y, std::span<const NodeId> labeled) {
    check_rows(z, y, "l2_fit");
    const Matrix masked_y = labeled_mask(y, labeled, "l2_fit");
    const Tensor rows = Tensor::constant(row_indicator(y.rows(), y.cols(), labeled));
    const Tensor diff = ad::elementwise_mul(rows, ad::sub(z, Tensor::constant(masked_y)));
    return ad::sum(ad::elementwise_mul(diff, diff));
}

// Σ_ij Â_ij ‖z_i - z_j‖² = 2 Σ_i r_i ‖z_i‖² - 2 Σ_i z_i · (Â z)_i with r the row sums.
// Diagonal pairs cancel in both terms, so include_self_loops has no effect.
Tensor l2_smooth(const Tensor& z, const NormalizedAdjacency& a_hat, bool /*include_self_loops*/) {
    check_adjacency(z, a_hat, "l2_smooth");
    const Vector r = a_hat.row_sums();
    Matrix row_weights(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) row_weights.row(i).setConstant(2.0 * r(i));
    const Tensor squared = ad::sum(ad::elementwise_mul(Tensor::constant(std::move(row_weights)), ad::elementwise_mul(z, z)));
    const Tensor cross = ad::sum(ad::elementwise_mul(z, ad::spmm(a_hat, z)));
    return ad::sub(squared, ad::scale(cross, 2.0));
}

Matrix one_hot_argmax(const Matrix& z) {
    Matrix phi = Matrix::Zero(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        if (z.cols() == 0) break;
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < z.cols(); ++j) {
            if (z(i, j) > z(i, best)) best = j;
        }
        phi(i, best) = 1.0;
    }
    return phi;
}

// Σ_ij Â_ij φ_i · log z_j = Σ_j (Âᵀ φ)_j · log z_j, and Âᵀ = Â.
Tensor ce_smooth_with_targets(const Tensor& z, const Matrix& targets, const NormalizedAdjacency& a_hat,
                              bool include_self_loops) {
    check_adjacency(z, a_hat, "ce_smooth");
    check_rows(z, targets, "ce_smooth");
    Matrix weights = a_hat.multiply(targets);
    if (!include_self_loops) weights -= a_hat.diagonal().asDiagonal() * targets;
    return ad::scale(ad::sum(ad::elementwise_mul(Tensor::constant(std::move(weights)), ad::log_clamped(z))), -1.0);
}

Tensor ce_smooth(const Tensor& z, const NormalizedAdjacency& a_hat, bool include_self_loops) {
    return ce_smooth_with_targets(z, one_hot_argmax(z.value()), a_hat, include_self_loops);
}

Tensor normalized_l2_smooth(const Tensor& z, const NormalizedAdjacency& a_hat) {
    check_adjacency(z, a_hat, "normalized_l2_smooth");
    return ad::sub(ad::sum(ad::elementwise_mul(z, z)), ad::sum(ad::elementwise_mul(z, ad::spmm(a_hat, z))));
}

Tensor normalized_l2_objective(const Tensor& z, const Matrix& y, const NormalizedAdjacency& a_hat, double mu) {
    check_rows(z, y, "normalized_l2_objective");
    const Tensor diff = ad::sub(z, Tensor::constant(y));
    const Tensor fit = ad::sum(ad::elementwise_mul(diff, diff));
    return ad::add(fit, ad::scale(normalized_l2_smooth(z, a_hat), mu));
}

LossTerms combined_loss_terms(const Tensor& z, const Matrix& y, std::span<const NodeId> labeled,
                              const NormalizedAdjacency& a_hat, const LossConfig& cfg) {
    cfg.validate();
    LossTerms terms;
    const bool l2 = cfg.variant == SmoothVariant::l2;
    terms.fit = l2 ? l2_fit(z, y, labeled) : ce_fit(z, y, labeled);
    if (cfg.mu == 0.0) {
        terms.total = terms.fit;
        return terms;
    }
    terms.smooth = l2 ? l2_smooth(z, a_hat, cfg.include_self_loops) : ce_smooth(z, a_hat, cfg.include_self_loops);
    terms.total = ad::add(terms.fit, ad::scale(terms.smooth, cfg.mu));
    return terms;
}

Tensor combined_loss(const Tensor& z, const Matrix& y, std::span<const NodeId> labeled,
                     const NormalizedAdjacency& a_hat, const LossConfig& cfg) {
    return combined_loss_terms(z, y, labeled, a_hat, cfg).total;
}

} // namespace gsmooth
