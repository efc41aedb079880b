#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "adaptrl/core.hpp"
#include "adaptrl/errors.hpp"

namespace adaptrl {

namespace detail {

/// Cholesky solve with one jitter-escalation retry (adds 1e-10 * trace/d).
inline Vector chol_solve(const Matrix& A, const Vector& rhs) {
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
    const double jitter = 1e-10 * A.trace() / static_cast<double>(A.rows());
    Matrix Aj = A + jitter * Matrix::Identity(A.rows(), A.cols());
    Eigen::LLT<Matrix> llt2(Aj);
    if (llt2.info() != Eigen::Success) throw SingularDesign("Cholesky failed after jitter");
    return llt2.solve(rhs);
}

inline Matrix chol_solve_mat(const Matrix& A, const Matrix& rhs) {
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
    const double jitter = 1e-10 * A.trace() / static_cast<double>(A.rows());
    Matrix Aj = A + jitter * Matrix::Identity(A.rows(), A.cols());
    Eigen::LLT<Matrix> llt2(Aj);
    if (llt2.info() != Eigen::Success) throw SingularDesign("Cholesky failed after jitter");
    return llt2.solve(rhs);
}

}  // namespace detail

/// (X'X + lambda I)^{-1} X'y via Cholesky; no explicit inverse is formed.
inline Vector ridge_fit(const Matrix& X, const Vector& y, double lambda) {
    if (X.rows() != y.size()) throw DimensionMismatch("ridge_fit: rows(X) != len(y)");
    if (X.rows() < 1) throw EmptyInput("ridge_fit: empty design");
    if (!X.allFinite() || !y.allFinite()) throw NonFiniteInput("ridge_fit: non-finite input");
    if (lambda < 0.0) throw Error("ridge_fit: negative lambda");
    Matrix A = X.transpose() * X + lambda * Matrix::Identity(X.cols(), X.cols());
    if (lambda == 0.0) {
        Eigen::LLT<Matrix> llt(A);
        if (llt.info() != Eigen::Success) throw SingularDesign("rank-deficient design, lambda=0");
        return llt.solve(X.transpose() * y);
    }
    return detail::chol_solve(A, X.transpose() * y);
}

/// Weighted ridge: minimizes sum w_i (y_i - x_i'b)^2 + lambda ||b||^2.
inline Vector wls_fit(const Matrix& X, const Vector& y, const Vector& weights, double lambda) {
    if (weights.size() != X.rows()) throw DimensionMismatch("wls_fit: weight length");
    if ((weights.array() <= 0.0).any()) throw NonPositiveWeight("wls_fit: weight <= 0");
    Matrix Xw = weights.array().sqrt().matrix().asDiagonal() * X;
    Vector yw = weights.array().sqrt().matrix().asDiagonal() * y;
    return ridge_fit(Xw, yw, lambda);
}

/// Online Gram statistics B = lambda I + sum f f', b = sum f y.
struct SuffStats {
    Matrix B;
    Vector b;
    std::size_t n = 0;
    double ridge_lambda = 1.0;

    SuffStats() = default;
    SuffStats(int d, double lambda = 1.0)
        : B(lambda * Matrix::Identity(d, d)), b(Vector::Zero(d)), n(0), ridge_lambda(lambda) {}

    int dim() const { return static_cast<int>(b.size()); }

    void update(const Vector& f, double y, double weight = 1.0) {
        if (f.size() != b.size()) throw DimensionMismatch("suffstats_update: feature dim");
        if (!f.allFinite() || !std::isfinite(y)) throw NonFiniteInput("suffstats_update");
        B.noalias() += weight * f * f.transpose();
        b.noalias() += weight * f * y;
        ++n;
    }

    /// Ridge point estimate B^{-1} b.
    Vector solve() const { return detail::chol_solve(B, b); }

    Vector solve(const Vector& rhs) const { return detail::chol_solve(B, rhs); }
};

inline SuffStats suffstats_update(SuffStats s, const Vector& f, double y) {
    s.update(f, y);
    return s;
}

/// Normal-Inverse-Gamma posterior for (beta, sigma^2).
struct NigPosterior {
    Vector mu;
    Matrix sigma_scale;  // SPD; beta | sigma2 ~ N(mu, sigma2 * sigma_scale)
    double a = 1.0;
    double b_ig = 1.0;

    NigPosterior() = default;
    NigPosterior(int d, double prior_scale = 1.0, double a0 = 1.0, double b0 = 1.0)
        : mu(Vector::Zero(d)),
          sigma_scale(prior_scale * Matrix::Identity(d, d)),
          a(a0),
          b_ig(b0) {
        if (a0 <= 0.0 || b0 <= 0.0) throw Error("NIG hyperparameters must be positive");
    }
};

/// Standard conjugate update for Gaussian likelihood with NIG prior.
inline NigPosterior nig_update(const NigPosterior& prior, const Matrix& X, const Vector& y) {
    if (X.rows() == 0) return prior;
    if (X.cols() != prior.mu.size()) throw DimensionMismatch("nig_update: feature dim");
    if (X.rows() != y.size()) throw DimensionMismatch("nig_update: rows(X) != len(y)");

    Matrix prior_prec = detail::chol_solve_mat(
        prior.sigma_scale, Matrix::Identity(prior.mu.size(), prior.mu.size()));
    Matrix post_prec = prior_prec + X.transpose() * X;
    Vector rhs = prior_prec * prior.mu + X.transpose() * y;

    NigPosterior post;
    post.mu = detail::chol_solve(post_prec, rhs);
    post.sigma_scale =
        detail::chol_solve_mat(post_prec, Matrix::Identity(post_prec.rows(), post_prec.cols()));
    // Symmetrize against round-off before downstream Cholesky factorizations.
    post.sigma_scale = 0.5 * (post.sigma_scale + post.sigma_scale.transpose()).eval();
    post.a = prior.a + 0.5 * static_cast<double>(X.rows());
    post.b_ig = prior.b_ig +
                0.5 * (y.dot(y) + prior.mu.dot(prior_prec * prior.mu) - post.mu.dot(rhs));
    return post;
}

/// sigma2 ~ InvGamma(a, b); beta | sigma2 ~ N(mu, sigma2 * sigma_scale).
/// Inverse-Gamma draws go through a Gamma reciprocal.
struct NigDraw {
    Vector beta;
    double sigma2;
};

inline NigDraw nig_sample(const NigPosterior& post, Rng& rng) {
    std::gamma_distribution<double> gamma(post.a, 1.0 / post.b_ig);
    double sigma2 = 1.0 / gamma(rng);
    Eigen::LLT<Matrix> llt(post.sigma_scale);
    Matrix L;
    if (llt.info() == Eigen::Success) {
        L = llt.matrixL();
    } else {
        const double jitter =
            1e-12 * std::max(post.sigma_scale.trace(), 1.0) / post.sigma_scale.rows();
        Eigen::LLT<Matrix> llt2(post.sigma_scale +
                                jitter * Matrix::Identity(post.sigma_scale.rows(),
                                                          post.sigma_scale.cols()));
        if (llt2.info() != Eigen::Success) throw SingularDesign("nig_sample: scale not SPD");
        L = llt2.matrixL();
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(post.mu.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    return {post.mu + std::sqrt(sigma2) * (L * z), sigma2};
}

/// Multivariate normal draw N(mu, cov); shared by LinTS and ACTS.
inline Vector mvn_sample(const Vector& mu, const Matrix& cov, Rng& rng) {
    if (cov.size() == 0 || mu.size() == 0) return mu;
    Eigen::LLT<Matrix> llt(cov);
    Matrix L;
    if (llt.info() == Eigen::Success) {
        L = llt.matrixL();
    } else {
        const double jitter = 1e-12 * std::max(cov.trace(), 1.0) / cov.rows();
        Eigen::LLT<Matrix> llt2(cov + jitter * Matrix::Identity(cov.rows(), cov.cols()));
        if (llt2.info() != Eigen::Success) throw SingularDesign("mvn_sample: cov not SPD");
        L = llt2.matrixL();
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(mu.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    return mu + L * z;
}

}  // namespace adaptrl
