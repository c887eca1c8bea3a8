#include <gsmooth/diffusion.hpp>
#include <gsmooth/errors.hpp>

#include <Eigen/Cholesky>

#include <cmath>

namespace gsmooth {

std::string_view to_string(DiffusionSolver solver) {
    return solver == DiffusionSolver::direct ? "direct" : "iterative";
}

void DiffusionConfig::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("diffusion: gamma must lie in (0, 1]");
    if (!(tol > 0.0)) throw InputError("diffusion: tol must be > 0");
    if (max_iter < 1) throw InputError("diffusion: max_iter must be >= 1");
}

LabelMatrix LabelMatrix::from_labels(std::span<const int> labels, std::span<const NodeId> labeled,
                                     std::size_t n_classes) {
    LabelMatrix m;
    m.y_ = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(n_classes));
    for (NodeId v : labeled) {
        if (v >= labels.size()) throw InputError("label matrix: node " + std::to_string(v) + " is out of range");
        const int c = labels[v];
        if (c < 0 || static_cast<std::size_t>(c) >= n_classes) {
            throw InputError("label matrix: node " + std::to_string(v) + " has class " + std::to_string(c) +
                             " outside [0, " + std::to_string(n_classes) + ")");
        }
        m.y_(v, c) = 1.0;
    }
    return m;
}

LabelMatrix LabelMatrix::from_matrix(Matrix y) {
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        int ones = 0;
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            const double v = y(i, j);
            if (v == 1.0) {
                ++ones;
            } else if (v != 0.0) {
                throw InputError("label matrix: row " + std::to_string(i) + " is neither one-hot nor zero");
            }
        }
        if (ones > 1) throw InputError("label matrix: row " + std::to_string(i) + " has more than one label");
    }
    LabelMatrix m;
    m.y_ = std::move(y);
    return m;
}

namespace {

void check_sizes(const NormalizedAdjacency& a_hat, const LabelMatrix& y) {
    if (static_cast<Eigen::Index>(a_hat.n_nodes()) != y.rows()) {
        throw InputError("diffusion: adjacency has " + std::to_string(a_hat.n_nodes()) +
                         " nodes but the label matrix has " + std::to_string(y.rows()) + " rows");
    }
}

} // namespace

Matrix diffuse_direct(const NormalizedAdjacency& a_hat, const LabelMatrix& y, double gamma) {
    check_sizes(a_hat, y);
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw InputError("diffuse_direct: gamma must lie in (0, 1]");
    if (gamma == 0.0) throw NumericError("diffuse_direct: system I - Â is singular at gamma = 0");
    const auto n = static_cast<Eigen::Index>(a_hat.n_nodes());
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    system -= (1.0 - gamma) * Eigen::MatrixXd(a_hat.to_dense());
    const Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success) {
        throw NumericError("diffuse_direct: I - (1-gamma) Â is not positive definite");
    }
    const Eigen::MatrixXd rhs = gamma * Eigen::MatrixXd(y.values());
    Matrix z = llt.solve(rhs);
    if (!z.allFinite()) throw NumericError("diffuse_direct: solution contains non-finite values");
    return z;
}

DiffusionResult diffuse_iterative(const NormalizedAdjacency& a_hat, const LabelMatrix& y, const DiffusionConfig& cfg,
                                  const std::optional<Matrix>& initial) {
    cfg.validate();
    check_sizes(a_hat, y);
    const Matrix restart = cfg.gamma * y.values();
    DiffusionResult result;
    if (initial) {
        if (initial->rows() != y.rows() || initial->cols() != y.cols()) {
            throw InputError("diffuse_iterative: initial matrix shape differs from the label matrix");
        }
        result.z = *initial;
    } else {
        result.z = y.values();
    }
    Matrix next(y.rows(), y.cols());
    for (std::size_t k = 1; k <= cfg.max_iter; ++k) {
        a_hat.multiply_into(result.z, next);
        next *= 1.0 - cfg.gamma;
        next += restart;
        const double change = y.values().size() == 0 ? 0.0 : (next - result.z).cwiseAbs().maxCoeff();
        result.z.swap(next);
        result.iterations = k;
        result.residual = change;
        result.residuals.push_back(change);
        if (!std::isfinite(change)) throw NumericError("diffuse_iterative: iteration diverged");
        if (change < cfg.tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

PropagationResult propagate_labels(const NormalizedAdjacency& a_hat, const LabelMatrix& y, const DiffusionConfig& cfg) {
    cfg.validate();
    check_sizes(a_hat, y);
    PropagationResult out;
    const Matrix& seeds = y.values();
    for (Eigen::Index c = 0; c < seeds.cols(); ++c) {
        if (seeds.col(c).sum() == 0.0) {
            out.warnings.push_back("class " + std::to_string(c) + " has no labeled nodes");
        }
    }

    Matrix z;
    if (cfg.solver == DiffusionSolver::direct) {
        z = diffuse_direct(a_hat, y, cfg.gamma);
    } else {
        DiffusionResult r = diffuse_iterative(a_hat, y, cfg);
        out.iterations = r.iterations;
        out.converged = r.converged;
        if (!r.converged) {
            out.warnings.push_back("diffusion did not converge within " + std::to_string(cfg.max_iter) +
                                   " iterations (residual " + std::to_string(r.residual) + ")");
        }
        z = std::move(r.z);
    }

    out.predicted.assign(static_cast<std::size_t>(z.rows()), 0);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const Vector row = y.is_labeled(i) ? Vector(seeds.row(i).transpose()) : Vector(z.row(i).transpose());
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < row.size(); ++j) {
            if (row(j) > row(best)) best = j;
        }
        out.predicted[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

} // namespace gsmooth
