#include <cmath>
#include <filesystem>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "dense_oracle.hpp"
#include "support.hpp"
#include "surfspline/errors.hpp"
#include "surfspline/fem.hpp"
#include "surfspline/sparse.hpp"

using namespace surfspline;
using testing_support::random_vector;

namespace {

// Sparse SPD matrix: a random graph Laplacian plus a positive diagonal.
SparseSymmetric random_spd(int m, std::uint64_t seed, double density = 0.1)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < i; ++j) {
            if (unit(rng) < density) {
                const double w = unit(rng);
                d(i, j) = d(j, i) = -w;
                d(i, i) += w;
                d(j, j) += w;
            }
        }
        d(i, i) += 0.1 + unit(rng);
    }
    return SparseSymmetric::from_lower_of(d.sparseView());
}

Eigen::MatrixXd permuted(const Eigen::MatrixXd& b, const std::vector<int>& perm)
{
    const auto m = b.rows();
    Eigen::MatrixXd out(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) out(i, j) = b(perm[i], perm[j]);
    }
    return out;
}

} // namespace

TEST(SparseSymmetric, StoresLowerTriangleAndMirrorsTriplets)
{
    const std::vector<Triplet> t = {{0, 0, 2.0}, {0, 1, -1.0}, {1, 1, 3.0}, {2, 2, 1.0}, {2, 2, 1.0}};
    const SparseSymmetric b = SparseSymmetric::from_triplets(3, t);
    EXPECT_EQ(b.coeff(1, 0), -1.0);
    EXPECT_EQ(b.coeff(0, 1), -1.0);
    EXPECT_EQ(b.coeff(2, 2), 2.0);
    EXPECT_EQ(b.stored_nonzeros(), 4);
    const Eigen::MatrixXd d = b.dense();
    EXPECT_TRUE(d.isApprox(d.transpose()));
    EXPECT_THROW(SparseSymmetric::from_triplets(2, t), DimensionError);
    const std::vector<Triplet> bad = {{0, 0, std::nan("")}};
    EXPECT_THROW(SparseSymmetric::from_triplets(1, bad), ParameterError);
}

TEST(SparseSymmetric, BlocksAndNorms)
{
    const SparseSymmetric b = random_spd(12, 3, 0.4);
    const Eigen::MatrixXd d = b.dense();
    const std::vector<int> rows = {4, 1, 7};
    const std::vector<int> cols = {0, 7, 11, 2};
    const Eigen::MatrixXd blk = Eigen::MatrixXd(b.block(rows, cols));
    const Eigen::MatrixXd sub = b.principal_submatrix(rows).dense();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) EXPECT_EQ(blk(i, j), d(rows[i], cols[j]));
        for (std::size_t j = 0; j < rows.size(); ++j) EXPECT_EQ(sub(i, j), d(rows[i], rows[j]));
    }
    EXPECT_NEAR(b.norm_frobenius(), d.norm(), 1e-12 * d.norm());
    EXPECT_NEAR(b.norm_inf(), d.cwiseAbs().rowwise().sum().maxCoeff(), 1e-12);
    const Eigen::VectorXd x = random_vector(12, 1);
    EXPECT_LT((b.multiply(x) - d * x).norm(), 1e-12 * (d * x).norm());
}

TEST(Cholesky, IdentityAndDiagonal)
{
    const CholeskyFactor id = cholesky(SparseSymmetric::diagonal(Eigen::VectorXd::Ones(5)));
    EXPECT_TRUE(id.dense_factor().isIdentity(0.0));
    EXPECT_EQ(log_determinant(id), 0.0);

    const CholeskyFactor d = cholesky(SparseSymmetric::diagonal(Eigen::Vector2d(4.0, 9.0)));
    const Eigen::MatrixXd l = permuted(Eigen::MatrixXd(Eigen::Vector2d(4.0, 9.0).asDiagonal()), d.perm()).llt().matrixL();
    EXPECT_TRUE(d.dense_factor().isApprox(l, 1e-15));
    EXPECT_NEAR(log_determinant(d), std::log(36.0), 1e-15);
    EXPECT_NEAR(log_determinant(cholesky(SparseSymmetric::diagonal(Eigen::Vector2d(std::exp(1.0), std::exp(2.0))))),
                3.0, 1e-14);
}

TEST(Cholesky, ReconstructsPermutedMatrix)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const SparseSymmetric b = random_spd(50, seed);
        const CholeskyFactor f = cholesky(b);
        const Eigen::MatrixXd l = f.dense_factor();
        const Eigen::MatrixXd pbp = permuted(b.dense(), f.perm());
        EXPECT_LT((l * l.transpose() - pbp).norm() / b.norm_frobenius(), 1e-12);
        EXPECT_GT(l.diagonal().minCoeff(), 0.0);
        EXPECT_TRUE(l.isLowerTriangular());
    }
}

TEST(Cholesky, SolveResidual)
{
    const SparseSymmetric b = random_spd(50, 7);
    const CholeskyFactor f = cholesky(b);
    const Eigen::VectorXd rhs = random_vector(50, 8);
    const Eigen::VectorXd x = solve(f, rhs);
    EXPECT_LT((b.multiply(x) - rhs).norm(), 1e-10 * rhs.norm());

    const Eigen::VectorXd x0 = random_vector(50, 9);
    EXPECT_LT((f.solve(b.multiply(x0)) - x0).norm(), 1e-9 * x0.norm());

    Eigen::MatrixXd multi(50, 3);
    for (int k = 0; k < 3; ++k) multi.col(k) = random_vector(50, 20 + k);
    const Eigen::MatrixXd xs = solve(f, multi);
    EXPECT_LT((b.dense() * xs - multi).norm(), 1e-10 * multi.norm());

    EXPECT_TRUE(solve(cholesky(SparseSymmetric::diagonal(Eigen::Vector2d(2.0, 4.0))), Eigen::VectorXd(Eigen::Vector2d(2.0, 4.0)))
                    .isApprox(Eigen::Vector2d(1.0, 1.0)));
    EXPECT_THROW(f.solve(Eigen::VectorXd(Eigen::VectorXd::Ones(3))), DimensionError);
}

TEST(Cholesky, LogDeterminantMatchesDense)
{
    const SparseSymmetric b = random_spd(30, 11);
    const double expected = b.dense().llt().matrixLLT().diagonal().array().log().sum() * 2.0;
    EXPECT_NEAR(log_determinant(cholesky(b)), expected, 1e-8 * std::fabs(expected));
}

TEST(Cholesky, ReportsFailingPivot)
{
    Eigen::Matrix3d d;
    d << 1, 0, 0, 0, -1, 0, 0, 0, 1;
    try {
        cholesky(SparseSymmetric::from_lower_of(d.sparseView()));
        FAIL() << "expected NotPositiveDefiniteError";
    } catch (const NotPositiveDefiniteError& e) {
        EXPECT_GE(e.pivot(), 0);
        EXPECT_LT(e.pivot(), 3);
    }
}

TEST(Cholesky, ReusesSymbolicAnalysis)
{
    const SparseSymmetric b = random_spd(40, 2);
    const CholeskyFactor f = cholesky(b);
    const SparseSymmetric scaled = b.scaled_symmetric(Eigen::VectorXd::Constant(40, 2.0));
    ASSERT_TRUE(f.symbolic()->matches(scaled));
    const CholeskyFactor g = cholesky(scaled, f.symbolic());
    EXPECT_EQ(g.symbolic(), f.symbolic());
    EXPECT_NEAR(g.log_determinant(), f.log_determinant() + 40.0 * std::log(4.0), 1e-9);
    EXPECT_FALSE(f.symbolic()->matches(random_spd(40, 3)));
    EXPECT_THROW(cholesky(random_spd(40, 3), f.symbolic()), DimensionError);
}

TEST(Cholesky, OrderingReducesFill)
{
    // An arrow matrix factors with O(m) fill only if the hub is eliminated last.
    const int m = 200;
    std::vector<Triplet> t;
    for (int i = 0; i < m; ++i) t.emplace_back(i, i, i == 0 ? m + 1.0 : 2.0);
    for (int i = 1; i < m; ++i) t.emplace_back(i, 0, 1.0);
    const CholeskyFactor f = cholesky(SparseSymmetric::from_triplets(m, t));
    EXPECT_LE(f.symbolic()->factor_nonzeros(), static_cast<std::size_t>(3 * m));
}

TEST(RankOneUpdate, ZeroVectorIsNoOp)
{
    const SparseSymmetric b = random_spd(20, 4);
    const CholeskyFactor f = cholesky(b);
    const CholeskyFactor g = rank_one_update(f, Eigen::VectorXd::Zero(20), 2.0);
    EXPECT_TRUE(g.dense_factor().isApprox(f.dense_factor(), 1e-15));
    EXPECT_EQ(g.log_determinant(), f.log_determinant());
}

TEST(RankOneUpdate, DiagonalUpdate)
{
    const int m = 4;
    const CholeskyFactor f = cholesky(SparseSymmetric::diagonal(Eigen::VectorXd::Ones(m)));
    const CholeskyFactor g = rank_one_update(f, Eigen::VectorXd::Unit(m, 0), 3.0);
    const Eigen::MatrixXd l = g.dense_factor();
    const Eigen::MatrixXd expected = Eigen::Vector4d(4.0, 1.0, 1.0, 1.0).asDiagonal();
    EXPECT_TRUE((l * l.transpose()).isApprox(permuted(expected, g.perm()), 1e-14));
    const auto pos = std::find(g.perm().begin(), g.perm().end(), 0) - g.perm().begin();
    EXPECT_NEAR(l(pos, pos), 2.0, 1e-15);
}

TEST(RankOneUpdate, MatchesDenseCholeskyOfUpdatedMatrix)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const SparseSymmetric b = random_spd(50, seed);
        const Eigen::VectorXd v = random_vector(50, seed + 10);
        const double w = 0.7;
        const CholeskyFactor g = rank_one_update(cholesky(b), v, w);
        const Eigen::MatrixXd updated = b.dense() + w * v * v.transpose();
        const Eigen::MatrixXd expected_l = permuted(updated, g.perm()).llt().matrixL();
        EXPECT_LT((g.dense_factor() - expected_l).norm() / expected_l.norm(), 1e-10);

        const Eigen::VectorXd rhs = random_vector(50, seed + 20);
        EXPECT_LT((updated * g.solve(rhs) - rhs).norm(), 1e-10 * rhs.norm());

        // Matrix determinant lemma.
        const double lemma = cholesky(b).log_determinant() + std::log(1.0 + w * v.dot(cholesky(b).solve(v)));
        EXPECT_NEAR(g.log_determinant(), lemma, 1e-8 * std::fabs(lemma));
    }
}

TEST(RankOneUpdate, Chains)
{
    const SparseSymmetric b = random_spd(30, 5);
    const Eigen::VectorXd v1 = random_vector(30, 1);
    const Eigen::VectorXd v2 = random_vector(30, 2);
    const CholeskyFactor g = cholesky(b).rank_one_update(v1, 0.5).rank_one_update(v2, 2.0);
    EXPECT_EQ(g.num_updates(), 2u);
    const Eigen::MatrixXd updated = b.dense() + 0.5 * v1 * v1.transpose() + 2.0 * v2 * v2.transpose();
    const Eigen::VectorXd rhs = random_vector(30, 3);
    EXPECT_LT((updated * g.solve(rhs) - rhs).norm(), 1e-10 * rhs.norm());
    EXPECT_THROW(cholesky(b).rank_one_update(v1, -1.0), ParameterError);
}

TEST(PowerIteration, DiagonalAndIdentity)
{
    const Eigen::Vector3d d(1.0, 2.0, 5.0);
    const EigenEstimate e = power_iteration_max([&](const Eigen::VectorXd& x) { return Eigen::VectorXd(d.cwiseProduct(x)); }, 3);
    EXPECT_NEAR(e.value, 5.0, 1e-7);
    EXPECT_LE(e.residual, 1e-8 * e.value);

    const EigenEstimate id = power_iteration_max([](const Eigen::VectorXd& x) { return x; }, 10);
    EXPECT_NEAR(id.value, 1.0, 1e-14);
    EXPECT_EQ(id.iterations, 1);
}

TEST(PowerIteration, ThrowsWithBestIterate)
{
    // A 0.9 eigenvalue ratio cannot reach 1e-15 in 5 iterations.
    PowerIterationOptions opts;
    opts.max_iters = 5;
    opts.tol = 1e-15;
    const Eigen::Vector4d dd(0.1, 3.0, 9.0, 10.0);
    try {
        power_iteration_max([&](const Eigen::VectorXd& x) { return Eigen::VectorXd(dd.cwiseProduct(x)); }, 4, opts);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.best_value(), 0.1);
        EXPECT_LE(e.best_value(), 10.0 + 1e-12);
        EXPECT_EQ(e.best_vector().size(), 4);
    }
}

TEST(PowerIteration, SecondSmallestOfSmallSpectrum)
{
    const SparseSymmetric s = SparseSymmetric::diagonal(Eigen::Vector3d(0.0, 2.0, 5.0));
    PowerIterationOptions opts;
    opts.tol = 1e-12;
    opts.max_iters = 200;
    const EigenEstimate e = second_smallest_eigenvalue(s, Eigen::Vector3d::UnitX(), opts);
    EXPECT_NEAR(e.value, 2.0, 1e-9);
}

TEST(PowerIteration, MatchesDenseSpectrumOnMesh)
{
    const FemSystem fem = assemble_fem_system(generate_sphere_mesh(2));
    const Eigen::VectorXd spectrum = oracle::s_spectrum(fem.mass_diag, fem.stiffness.dense());
    // The top of the spectrum is tightly clustered, so the residual test needs
    // far more than the default 10 m iterations.
    PowerIterationOptions opts;
    opts.max_iters = 100 * static_cast<int>(fem.size());
    const EigenEstimate top = largest_eigenvalue_of_s(fem, opts);
    EXPECT_LT(std::fabs(top.value - spectrum[spectrum.size() - 1]) / spectrum[spectrum.size() - 1], 1e-6);
    EXPECT_LE(top.residual, 1e-8 * top.value * (1.0 + 1e-9));
    const EigenEstimate second = second_smallest_eigenvalue_of_s(fem, opts);
    EXPECT_LT(std::fabs(second.value - spectrum[1]) / spectrum[1], 1e-6);
    EXPECT_GE(second.value, 0.0);
}

TEST(MatrixMarket, RoundTrip)
{
    const SparseSymmetric b = random_spd(15, 6);
    const auto path = std::filesystem::temp_directory_path() / "surfspline_mm_roundtrip.mtx";
    write_matrix_market(b, path);
    const SparseSymmetric back = read_matrix_market(path);
    EXPECT_LT((back.dense() - b.dense()).norm(), 1e-14 * b.norm_frobenius());
    std::filesystem::remove(path);
}
