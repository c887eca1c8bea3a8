#pragma once

#include <gsmooth/graph.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gsmooth {

enum class DiffusionSolver { iterative, direct };

std::string_view to_string(DiffusionSolver solver);

struct DiffusionConfig {
    double gamma = 0.1;  // restart weight, 1 / (mu + 1)
    double tol = 1e-8;   // max-abs change between sweeps
    std::size_t max_iter = 10'000;
    DiffusionSolver solver = DiffusionSolver::iterative;

    void validate() const;
};

/// Seed labels: one-hot rows for labeled nodes, zero rows for the rest.
class LabelMatrix {
public:
    LabelMatrix() = default;
    /// Throws InputError on out-of-range nodes or class ids.
    static LabelMatrix from_labels(std::span<const int> labels, std::span<const NodeId> labeled, std::size_t n_classes);
    /// Checks every row is one-hot or all-zero.
    static LabelMatrix from_matrix(Matrix y);

    const Matrix& values() const { return y_; }
    Eigen::Index rows() const { return y_.rows(); }
    Eigen::Index cols() const { return y_.cols(); }
    bool is_labeled(Eigen::Index row) const { return y_.row(row).sum() > 0.5; }

private:
    Matrix y_;
};

/// Z* = γ (I - (1-γ) Â)⁻¹ Y via a dense Cholesky factorization. Intended for
/// n up to a few thousand. Throws NumericError when the system is singular
/// (γ = 0) or not positive definite.
Matrix diffuse_direct(const NormalizedAdjacency& a_hat, const LabelMatrix& y, double gamma);

struct DiffusionResult {
    Matrix z;
    std::size_t iterations = 0;
    double residual = 0.0;  // max-abs change of the last sweep
    bool converged = false;
    std::vector<double> residuals;  // per sweep
};

/// Zᵏ = (1-γ) Â Zᵏ⁻¹ + γ Y from Z⁰ = Y (or `initial`). Stops once the
/// max-abs change drops below tol. Running out of iterations is reported
/// through `converged`, not an exception.
DiffusionResult diffuse_iterative(const NormalizedAdjacency& a_hat, const LabelMatrix& y, const DiffusionConfig& cfg,
                                  const std::optional<Matrix>& initial = std::nullopt);

struct PropagationResult {
    std::vector<int> predicted;  // class per node
    std::vector<std::string> warnings;
    std::size_t iterations = 0;  // 0 for the direct solver
    bool converged = true;
};

/// Row-wise argmax of the diffusion output (ties to the lowest class);
/// labeled nodes report their seed class.
PropagationResult propagate_labels(const NormalizedAdjacency& a_hat, const LabelMatrix& y, const DiffusionConfig& cfg);

} // namespace gsmooth
