#include "surfspline/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/OrderingMethods>
#include <unsupported/Eigen/SparseExtra>

#include "surfspline/errors.hpp"

namespace surfspline {

SparseSymmetric::SparseSymmetric(SparseMatrix lower)
    : lower_(std::move(lower))
{
    lower_.makeCompressed();
}

SparseSymmetric SparseSymmetric::from_lower_of(const SparseMatrix& full)
{
    if (full.rows() != full.cols()) throw DimensionError("symmetric matrix must be square");
    SparseMatrix lower = full.triangularView<Eigen::Lower>();
    for (Eigen::Index k = 0; k < lower.nonZeros(); ++k) {
        if (!std::isfinite(lower.valuePtr()[k])) throw ParameterError("matrix has non-finite entries");
    }
    return SparseSymmetric(std::move(lower));
}

SparseSymmetric SparseSymmetric::from_triplets(Eigen::Index size, std::span<const Triplet> entries)
{
    std::vector<Triplet> lower;
    lower.reserve(entries.size());
    for (const auto& t : entries) {
        if (t.row() < 0 || t.col() < 0 || t.row() >= size || t.col() >= size) {
            throw DimensionError("triplet index out of range");
        }
        if (!std::isfinite(t.value())) throw ParameterError("matrix has non-finite entries");
        lower.emplace_back(std::max(t.row(), t.col()), std::min(t.row(), t.col()), t.value());
    }
    SparseMatrix m(size, size);
    m.setFromTriplets(lower.begin(), lower.end());
    return SparseSymmetric(std::move(m));
}

SparseSymmetric SparseSymmetric::diagonal(const Eigen::VectorXd& d)
{
    SparseMatrix m(d.size(), d.size());
    m.reserve(Eigen::VectorXi::Ones(d.size()));
    for (Eigen::Index i = 0; i < d.size(); ++i) m.insert(i, i) = d[i];
    return SparseSymmetric(std::move(m));
}

SparseMatrix SparseSymmetric::full() const
{
    SparseMatrix f = lower_.selfadjointView<Eigen::Lower>();
    return f;
}

Eigen::MatrixXd SparseSymmetric::dense() const
{
    return Eigen::MatrixXd(full());
}

Eigen::VectorXd SparseSymmetric::diagonal_values() const
{
    return lower_.diagonal();
}

double SparseSymmetric::coeff(Eigen::Index i, Eigen::Index j) const
{
    return i >= j ? lower_.coeff(i, j) : lower_.coeff(j, i);
}

Eigen::VectorXd SparseSymmetric::multiply(const Eigen::VectorXd& x) const
{
    if (x.size() != size()) throw DimensionError("vector length does not match matrix size");
    return lower_.selfadjointView<Eigen::Lower>() * x;
}

SparseSymmetric SparseSymmetric::principal_submatrix(std::span<const int> idx) const
{
    std::vector<int> map(static_cast<std::size_t>(size()), -1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= size()) throw DimensionError("submatrix index out of range");
        map[idx[k]] = static_cast<int>(k);
    }
    std::vector<Triplet> trips;
    for (Eigen::Index j = 0; j < lower_.outerSize(); ++j) {
        if (map[j] < 0) continue;
        for (SparseMatrix::InnerIterator it(lower_, j); it; ++it) {
            const int r = map[it.row()];
            if (r >= 0) trips.emplace_back(r, map[j], it.value());
        }
    }
    return from_triplets(static_cast<Eigen::Index>(idx.size()), trips);
}

SparseMatrix SparseSymmetric::block(std::span<const int> rows, std::span<const int> cols) const
{
    std::vector<int> rmap(static_cast<std::size_t>(size()), -1);
    std::vector<int> cmap(static_cast<std::size_t>(size()), -1);
    for (std::size_t k = 0; k < rows.size(); ++k) rmap.at(static_cast<std::size_t>(rows[k])) = static_cast<int>(k);
    for (std::size_t k = 0; k < cols.size(); ++k) cmap.at(static_cast<std::size_t>(cols[k])) = static_cast<int>(k);
    std::vector<Triplet> trips;
    for (Eigen::Index j = 0; j < lower_.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(lower_, j); it; ++it) {
            const auto i = it.row();
            if (rmap[i] >= 0 && cmap[j] >= 0) trips.emplace_back(rmap[i], cmap[j], it.value());
            if (i != j && rmap[j] >= 0 && cmap[i] >= 0) trips.emplace_back(rmap[j], cmap[i], it.value());
        }
    }
    SparseMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

double SparseSymmetric::norm_inf() const
{
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(size());
    for (Eigen::Index j = 0; j < lower_.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(lower_, j); it; ++it) {
            rows[it.row()] += std::fabs(it.value());
            if (it.row() != j) rows[j] += std::fabs(it.value());
        }
    }
    return size() > 0 ? rows.maxCoeff() : 0.0;
}

double SparseSymmetric::norm_frobenius() const
{
    double sum = 0.0;
    for (Eigen::Index j = 0; j < lower_.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(lower_, j); it; ++it) {
            sum += (it.row() == j ? 1.0 : 2.0) * it.value() * it.value();
        }
    }
    return std::sqrt(sum);
}

SparseSymmetric SparseSymmetric::scaled_symmetric(const Eigen::VectorXd& d, double a) const
{
    if (d.size() != size()) throw DimensionError("scaling length does not match matrix size");
    SparseMatrix out = lower_;
    for (Eigen::Index j = 0; j < out.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(out, j); it; ++it) it.valueRef() *= a * d[it.row()] * d[j];
    }
    return SparseSymmetric(std::move(out));
}

namespace {

// Nonzero pattern of row k of L, returned in s[top..n): the union of the
// elimination-tree paths from every C(i, k), i < k.
int ereach(const SparseMatrix& c, int k, const std::vector<int>& parent, std::vector<int>& s,
           std::vector<int>& mark)
{
    const int n = static_cast<int>(c.cols());
    int top = n;
    mark[k] = k;
    for (SparseMatrix::InnerIterator it(c, k); it; ++it) {
        int i = static_cast<int>(it.row());
        if (i > k) continue;
        int len = 0;
        for (; mark[i] != k; i = parent[i]) {
            s[len++] = i;
            mark[i] = k;
        }
        while (len > 0) s[--top] = s[--len];
    }
    return top;
}

// Upper triangle of P B P^T in CSC, with perm[new] = old.
SparseMatrix permuted_upper(const SparseSymmetric& b, const std::vector<int>& pinv)
{
    const auto& lower = b.lower();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(lower.nonZeros()));
    for (Eigen::Index j = 0; j < lower.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(lower, j); it; ++it) {
            const int a = pinv[it.row()];
            const int c = pinv[j];
            trips.emplace_back(std::min(a, c), std::max(a, c), it.value());
        }
    }
    SparseMatrix c(b.size(), b.size());
    c.setFromTriplets(trips.begin(), trips.end());
    return c;
}

} // namespace

std::shared_ptr<const SymbolicCholesky> SymbolicCholesky::analyze(const SparseSymmetric& b)
{
    const auto n = static_cast<int>(b.size());
    auto sym = std::make_shared<SymbolicCholesky>();

    Eigen::AMDOrdering<int> amd;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> ordering;
    amd(b.lower().selfadjointView<Eigen::Lower>(), ordering);
    sym->perm_.assign(ordering.indices().data(), ordering.indices().data() + n);
    sym->pinv_.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) sym->pinv_[sym->perm_[k]] = k;

    const SparseMatrix c = permuted_upper(b, sym->pinv_);

    // Elimination tree with path compression through ancestors.
    sym->parent_.assign(static_cast<std::size_t>(n), -1);
    std::vector<int> ancestor(static_cast<std::size_t>(n), -1);
    for (int k = 0; k < n; ++k) {
        for (SparseMatrix::InnerIterator it(c, k); it; ++it) {
            for (int i = static_cast<int>(it.row()); i != -1 && i < k;) {
                const int next = ancestor[i];
                ancestor[i] = k;
                if (next == -1) sym->parent_[i] = k;
                i = next;
            }
        }
    }

    std::vector<int> counts(static_cast<std::size_t>(n), 1);
    std::vector<int> s(static_cast<std::size_t>(n));
    std::vector<int> mark(static_cast<std::size_t>(n), -1);
    for (int k = 0; k < n; ++k) {
        for (int top = ereach(c, k, sym->parent_, s, mark); top < n; ++top) ++counts[s[top]];
    }
    sym->lp_.resize(static_cast<std::size_t>(n) + 1);
    sym->lp_[0] = 0;
    for (int k = 0; k < n; ++k) sym->lp_[k + 1] = sym->lp_[k] + counts[k];

    const auto& lower = b.lower();
    sym->pattern_outer_.assign(lower.outerIndexPtr(), lower.outerIndexPtr() + n + 1);
    sym->pattern_inner_.assign(lower.innerIndexPtr(), lower.innerIndexPtr() + lower.nonZeros());
    return sym;
}

bool SymbolicCholesky::matches(const SparseSymmetric& b) const
{
    const auto& lower = b.lower();
    if (lower.rows() != size() || lower.nonZeros() != static_cast<Eigen::Index>(pattern_inner_.size())) {
        return false;
    }
    return std::equal(pattern_outer_.begin(), pattern_outer_.end(), lower.outerIndexPtr()) &&
           std::equal(pattern_inner_.begin(), pattern_inner_.end(), lower.innerIndexPtr());
}

CholeskyFactor CholeskyFactor::factorize(const SparseSymmetric& b, std::shared_ptr<const SymbolicCholesky> symbolic)
{
    const auto n = static_cast<int>(b.size());
    if (n == 0) throw DimensionError("cannot factorize an empty matrix");
    if (!symbolic) {
        symbolic = SymbolicCholesky::analyze(b);
    } else if (!symbolic->matches(b)) {
        throw DimensionError("symbolic analysis does not match the matrix pattern");
    }

    const SparseMatrix c = permuted_upper(b, symbolic->inverse_perm());
    const auto& lp = symbolic->column_pointers();
    const auto& parent = symbolic->parent();
    const double threshold = 1e-14 * std::max(0.0, b.diagonal_values().maxCoeff());

    std::vector<int> li(static_cast<std::size_t>(lp.back()));
    std::vector<double> lx(static_cast<std::size_t>(lp.back()));
    std::vector<int> next(lp.begin(), lp.end() - 1);
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    std::vector<int> s(static_cast<std::size_t>(n));
    std::vector<int> mark(static_cast<std::size_t>(n), -1);

    // Up-looking: row k of L from a sparse triangular solve with rows 0..k-1.
    for (int k = 0; k < n; ++k) {
        int top = ereach(c, k, parent, s, mark);
        x[k] = 0.0;
        for (SparseMatrix::InnerIterator it(c, k); it; ++it) {
            if (it.row() <= k) x[it.row()] = it.value();
        }
        double d = x[k];
        x[k] = 0.0;
        for (; top < n; ++top) {
            const int i = s[top];
            const double lki = x[i] / lx[lp[i]];
            x[i] = 0.0;
            for (int p = lp[i] + 1; p < next[i]; ++p) x[li[p]] -= lx[p] * lki;
            d -= lki * lki;
            const int p = next[i]++;
            li[p] = k;
            lx[p] = lki;
        }
        if (!(d > threshold)) {
            throw NotPositiveDefiniteError("matrix is not positive definite: pivot " + std::to_string(k) +
                                               " is " + std::to_string(d),
                                           k);
        }
        const int p = next[k]++;
        li[p] = k;
        lx[p] = std::sqrt(d);
    }

    CholeskyFactor f;
    f.symbolic_ = std::move(symbolic);
    f.l_ = Eigen::Map<const SparseMatrix>(n, n, lp.back(), lp.data(), li.data(), lx.data());
    f.logdet_ = 0.0;
    for (int k = 0; k < n; ++k) f.logdet_ += 2.0 * std::log(lx[lp[k]]);
    return f;
}

Eigen::VectorXd CholeskyFactor::permute(const Eigen::VectorXd& x) const
{
    const auto& perm = symbolic_->perm();
    Eigen::VectorXd out(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) out[k] = x[perm[k]];
    return out;
}

Eigen::VectorXd CholeskyFactor::unpermute(const Eigen::VectorXd& x) const
{
    const auto& perm = symbolic_->perm();
    Eigen::VectorXd out(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) out[perm[k]] = x[k];
    return out;
}

void CholeskyFactor::lower_solve_in_place(Eigen::VectorXd& x) const
{
    const int* lp = l_.outerIndexPtr();
    const int* li = l_.innerIndexPtr();
    const double* lx = l_.valuePtr();
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        x[j] /= lx[lp[j]];
        const double xj = x[j];
        for (int p = lp[j] + 1; p < lp[j + 1]; ++p) x[li[p]] -= lx[p] * xj;
    }
    for (const auto& u : updates_) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            x[j] = (x[j] - u.p[j] * acc) / u.d[j];
            acc += u.b[j] * x[j];
        }
    }
}

void CholeskyFactor::upper_solve_in_place(Eigen::VectorXd& x) const
{
    for (auto it = updates_.rbegin(); it != updates_.rend(); ++it) {
        const auto& u = *it;
        double acc = 0.0;
        for (Eigen::Index j = x.size() - 1; j >= 0; --j) {
            x[j] = (x[j] - u.b[j] * acc) / u.d[j];
            acc += u.p[j] * x[j];
        }
    }
    const int* lp = l_.outerIndexPtr();
    const int* li = l_.innerIndexPtr();
    const double* lx = l_.valuePtr();
    for (Eigen::Index j = x.size() - 1; j >= 0; --j) {
        double v = x[j];
        for (int p = lp[j] + 1; p < lp[j + 1]; ++p) v -= lx[p] * x[li[p]];
        x[j] = v / lx[lp[j]];
    }
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& rhs) const
{
    if (rhs.size() != size()) throw DimensionError("right-hand side length does not match factor size");
    Eigen::VectorXd x = permute(rhs);
    lower_solve_in_place(x);
    upper_solve_in_place(x);
    return unpermute(x);
}

Eigen::MatrixXd CholeskyFactor::solve(const Eigen::MatrixXd& rhs) const
{
    if (rhs.rows() != size()) throw DimensionError("right-hand side rows do not match factor size");
    Eigen::MatrixXd out(rhs.rows(), rhs.cols());
    for (Eigen::Index c = 0; c < rhs.cols(); ++c) out.col(c) = solve(Eigen::VectorXd(rhs.col(c)));
    return out;
}

CholeskyFactor CholeskyFactor::rank_one_update(const Eigen::VectorXd& v, double weight) const
{
    if (v.size() != size()) throw DimensionError("update vector length does not match factor size");
    if (!(weight > 0.0) || !std::isfinite(weight)) throw ParameterError("rank-one update weight must be positive");
    CholeskyFactor out = *this;
    if (v.isZero(0.0)) return out;

    // L' L'^T + w (Pv)(Pv)^T = L' (I + w p p^T) L'^T with L' p = P v.
    Eigen::VectorXd p = permute(v);
    lower_solve_in_place(p);
    Update u{p, Eigen::VectorXd(p.size()), Eigen::VectorXd(p.size())};
    double sigma = weight;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        const double d = std::sqrt(1.0 + sigma * p[j] * p[j]);
        u.d[j] = d;
        u.b[j] = sigma * p[j] / d;
        sigma /= d * d;
        out.logdet_ += 2.0 * std::log(d);
    }
    out.updates_.push_back(std::move(u));
    return out;
}

Eigen::MatrixXd CholeskyFactor::dense_factor() const
{
    Eigen::MatrixXd l = Eigen::MatrixXd(l_);
    for (const auto& u : updates_) {
        const Eigen::Index n = u.p.size();
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            t(j, j) = u.d[j];
            for (Eigen::Index i = j + 1; i < n; ++i) t(i, j) = u.p[i] * u.b[j];
        }
        l = l * t;
    }
    return l;
}

CholeskyFactor cholesky(const SparseSymmetric& b, std::shared_ptr<const SymbolicCholesky> symbolic)
{
    return CholeskyFactor::factorize(b, std::move(symbolic));
}

CholeskyFactor rank_one_update(const CholeskyFactor& factor, const Eigen::VectorXd& v, double weight)
{
    return factor.rank_one_update(v, weight);
}

Eigen::VectorXd solve(const CholeskyFactor& factor, const Eigen::VectorXd& rhs)
{
    return factor.solve(rhs);
}

Eigen::MatrixXd solve(const CholeskyFactor& factor, const Eigen::MatrixXd& rhs)
{
    return factor.solve(rhs);
}

double log_determinant(const CholeskyFactor& factor)
{
    return factor.log_determinant();
}

EigenEstimate power_iteration_max(const LinearOperator& matvec, Eigen::Index dimension,
                                  const PowerIterationOptions& options)
{
    if (dimension <= 0) throw DimensionError("power iteration needs a positive dimension");
    if (!(options.tol > 0.0)) throw ParameterError("power iteration tolerance must be positive");
    const int max_iters = options.max_iters > 0 ? options.max_iters : static_cast<int>(10 * dimension);

    auto project = [&](Eigen::VectorXd& x) {
        for (const auto& q : options.orthogonal_to) x -= q * (q.dot(x) / q.squaredNorm());
    };

    std::mt19937_64 rng(static_cast<std::uint64_t>(dimension));
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(dimension);
    for (Eigen::Index i = 0; i < dimension; ++i) v[i] = normal(rng);
    project(v);
    v.normalize();

    EigenEstimate best;
    best.residual = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iters; ++it) {
        Eigen::VectorXd w = matvec(v);
        if (w.size() != dimension) throw DimensionError("operator returned a vector of the wrong length");
        project(w);
        const double lambda = v.dot(w);
        const double residual = (w - lambda * v).norm();
        if (lambda > best.value || it == 1) {
            best.value = lambda;
            best.vector = v;
            best.iterations = it;
            best.residual = residual;
        }
        if (residual <= options.tol * std::fabs(lambda) || w.norm() == 0.0) {
            return {lambda, v, it, residual};
        }
        v = w / w.norm();
    }
    throw ConvergenceError("power iteration did not converge in " + std::to_string(max_iters) +
                               " iterations (residual " + std::to_string(best.residual) + ")",
                           best.value, best.vector);
}

EigenEstimate second_smallest_eigenvalue(const SparseSymmetric& s, const Eigen::VectorXd& null_vector,
                                         const PowerIterationOptions& options)
{
    if (null_vector.size() != s.size()) throw DimensionError("kernel vector length does not match matrix size");
    const Eigen::VectorXd u = null_vector.normalized();
    const CholeskyFactor shifted = cholesky(
        SparseSymmetric::from_lower_of(s.lower() + SparseMatrix(Eigen::VectorXd::Ones(s.size()).asDiagonal())));
    PowerIterationOptions opts = options;
    opts.orthogonal_to.push_back(u);
    auto op = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd y = shifted.solve(x);
        y -= u * u.dot(x);
        return y;
    };
    EigenEstimate mu;
    try {
        mu = power_iteration_max(op, s.size(), opts);
    } catch (const ConvergenceError& e) {
        const double lambda = e.best_value() > 0.0 ? std::max(0.0, 1.0 / e.best_value() - 1.0) : 0.0;
        throw ConvergenceError(e.what(), lambda, e.best_vector());
    }
    EigenEstimate out = mu;
    out.value = mu.value > 0.0 ? std::max(0.0, 1.0 / mu.value - 1.0) : 0.0;
    return out;
}

void write_matrix_market(const SparseSymmetric& b, const std::filesystem::path& path)
{
    if (!Eigen::saveMarket(b.lower(), path.string(), Eigen::Symmetric)) {
        throw LoadError("cannot write " + path.string(), 0);
    }
}

SparseSymmetric read_matrix_market(const std::filesystem::path& path)
{
    SparseMatrix m;
    if (!std::filesystem::exists(path) || !Eigen::loadMarket(m, path.string())) {
        throw LoadError("cannot read " + path.string(), 0);
    }
    if (m.rows() != m.cols()) throw LoadError("MatrixMarket matrix is not square", 0);
    return SparseSymmetric::from_lower_of(m);
}

} // namespace surfspline
