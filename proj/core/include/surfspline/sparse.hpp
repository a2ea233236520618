#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace surfspline {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Symmetric matrix stored as the compressed lower triangle (diagonal included).
class SparseSymmetric {
public:
    SparseSymmetric() = default;

    /// Keeps the lower triangle of `full`; the upper triangle is ignored.
    static SparseSymmetric from_lower_of(const SparseMatrix& full);
    /// Entries above the diagonal are mirrored into the lower triangle and
    /// duplicates are summed, so each off-diagonal pair must be given once.
    static SparseSymmetric from_triplets(Eigen::Index size, std::span<const Triplet> entries);
    static SparseSymmetric diagonal(const Eigen::VectorXd& d);

    Eigen::Index size() const { return lower_.rows(); }
    Eigen::Index stored_nonzeros() const { return lower_.nonZeros(); }
    const SparseMatrix& lower() const { return lower_; }

    SparseMatrix full() const;
    Eigen::MatrixXd dense() const;
    Eigen::VectorXd diagonal_values() const;
    double coeff(Eigen::Index i, Eigen::Index j) const;

    Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;

    /// Rows and columns `idx` (in that order), as a symmetric matrix.
    SparseSymmetric principal_submatrix(std::span<const int> idx) const;
    /// General block B[rows, cols].
    SparseMatrix block(std::span<const int> rows, std::span<const int> cols) const;

    double norm_inf() const;
    double norm_frobenius() const;

    /// Same pattern with values scaled by a * D x D (D diagonal).
    SparseSymmetric scaled_symmetric(const Eigen::VectorXd& d, double a = 1.0) const;

private:
    explicit SparseSymmetric(SparseMatrix lower);

    SparseMatrix lower_;
};

/// Fill-reducing ordering and factor structure for one sparsity pattern.
class SymbolicCholesky {
public:
    static std::shared_ptr<const SymbolicCholesky> analyze(const SparseSymmetric& b);

    Eigen::Index size() const { return static_cast<Eigen::Index>(perm_.size()); }
    /// perm()[new] = old: (P B P^T)(i, j) = B(perm[i], perm[j]).
    const std::vector<int>& perm() const { return perm_; }
    const std::vector<int>& inverse_perm() const { return pinv_; }
    const std::vector<int>& parent() const { return parent_; }
    const std::vector<int>& column_pointers() const { return lp_; }
    std::size_t factor_nonzeros() const { return static_cast<std::size_t>(lp_.back()); }

    /// True if `b` has exactly the pattern this analysis was computed for.
    bool matches(const SparseSymmetric& b) const;

private:
    std::vector<int> perm_;
    std::vector<int> pinv_;
    std::vector<int> parent_;
    std::vector<int> lp_;
    std::vector<int> pattern_outer_;
    std::vector<int> pattern_inner_;
};

/// Sparse factor P B P^T = L L^T, optionally followed by positive rank-one
/// updates held in product form (L' = L T_1 ... T_k) so the dense update vectors
/// never fill L.
class CholeskyFactor {
public:
    CholeskyFactor() = default;

    /// Reuses `symbolic` when given; it must match the pattern of `b`.
    static CholeskyFactor factorize(const SparseSymmetric& b,
                                    std::shared_ptr<const SymbolicCholesky> symbolic = nullptr);

    Eigen::Index size() const { return l_.rows(); }
    const SparseMatrix& sparse_factor() const { return l_; }
    const std::shared_ptr<const SymbolicCholesky>& symbolic() const { return symbolic_; }
    const std::vector<int>& perm() const { return symbolic_->perm(); }
    std::size_t num_updates() const { return updates_.size(); }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

    /// log det of the represented matrix.
    double log_determinant() const { return logdet_; }

    /// Factor of B + weight * v v^T (v in the original ordering).
    CholeskyFactor rank_one_update(const Eigen::VectorXd& v, double weight) const;

    /// Dense L' with P (B + updates) P^T = L' L'^T. Intended for small checks.
    Eigen::MatrixXd dense_factor() const;

private:
    struct Update {
        Eigen::VectorXd p;
        Eigen::VectorXd b;
        Eigen::VectorXd d;
    };

    Eigen::VectorXd permute(const Eigen::VectorXd& x) const;
    Eigen::VectorXd unpermute(const Eigen::VectorXd& x) const;
    void lower_solve_in_place(Eigen::VectorXd& x) const;
    void upper_solve_in_place(Eigen::VectorXd& x) const;

    std::shared_ptr<const SymbolicCholesky> symbolic_;
    SparseMatrix l_;
    std::vector<Update> updates_;
    double logdet_ = 0.0;
};

CholeskyFactor cholesky(const SparseSymmetric& b, std::shared_ptr<const SymbolicCholesky> symbolic = nullptr);
CholeskyFactor rank_one_update(const CholeskyFactor& factor, const Eigen::VectorXd& v, double weight);
Eigen::VectorXd solve(const CholeskyFactor& factor, const Eigen::VectorXd& rhs);
Eigen::MatrixXd solve(const CholeskyFactor& factor, const Eigen::MatrixXd& rhs);
double log_determinant(const CholeskyFactor& factor);

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct EigenEstimate {
    double value = 0.0;
    Eigen::VectorXd vector;
    int iterations = 0;
    double residual = 0.0;
};

struct PowerIterationOptions {
    double tol = 1e-8;
    /// 0 means 10 * dimension.
    int max_iters = 0;
    /// Vectors orthogonal to every entry are searched (deflation of known kernels).
    std::vector<Eigen::VectorXd> orthogonal_to;
};

/// Dominant eigenpair of a symmetric PSD operator. Stops when
/// ||A v - lambda v|| <= tol * lambda; throws ConvergenceError with the best
/// Rayleigh quotient otherwise. The start vector is seeded by the dimension.
EigenEstimate power_iteration_max(const LinearOperator& matvec, Eigen::Index dimension,
                                  const PowerIterationOptions& options = {});

/// Second smallest eigenvalue of a PSD `s` whose kernel is spanned by the unit
/// vector `null_vector`, from the dominant eigenvalue mu of
/// (S + I)^{-1} - u u^T: lambda_1 = 1 / mu - 1.
EigenEstimate second_smallest_eigenvalue(const SparseSymmetric& s, const Eigen::VectorXd& null_vector,
                                         const PowerIterationOptions& options = {});

void write_matrix_market(const SparseSymmetric& b, const std::filesystem::path& path);
SparseSymmetric read_matrix_market(const std::filesystem::path& path);

} // namespace surfspline
