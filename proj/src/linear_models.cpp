#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "cascade/estimator.hpp"

namespace cascade {

namespace {

struct LeastSquares {
    Eigen::VectorXd beta;
    Eigen::MatrixXd xtx_inv;
    double rss = 0.0;
    double logdet_xtx = 0.0;
};

// Column-pivoted Householder QR; X must have full column rank.
LeastSquares least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const auto p = X.cols();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    LeastSquares out;
    out.beta = qr.solve(y);
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd perm_inv = r_inv * r_inv.transpose();
    const auto& P = qr.colsPermutation();
    out.xtx_inv = P * perm_inv * P.transpose();
    out.xtx_inv = 0.5 * (out.xtx_inv + out.xtx_inv.transpose()).eval();
    out.rss = (y - X * out.beta).squaredNorm();
    for (Eigen::Index k = 0; k < p; ++k) out.logdet_xtx += 2.0 * std::log(std::abs(R(k, k)));
    return out;
}

bool is_exact(double rss, const Eigen::VectorXd& y) { return rss <= 1e-20 * std::max(1.0, y.squaredNorm()); }

double reml_value(double n_minus_p, double sigma2, double logdet_v, double logdet_xtx) {
    return -0.5 * (n_minus_p * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0) + logdet_v + logdet_xtx);
}

std::vector<std::string> default_names(Eigen::Index p) {
    std::vector<std::string> names;
    for (Eigen::Index k = 0; k < p; ++k) names.push_back(fmt::format("b{}", k));
    return names;
}

int count_groups(const std::vector<int>& groups) { return static_cast<int>(std::set<int>(groups.begin(), groups.end()).size()); }

// Restricted likelihood of the one-way random-intercept model at a fixed
// variance ratio. Within group k the transform x - a_k * mean_k(x) with
// a_k = 1 - 1/sqrt(1 + ratio * n_k) whitens the covariance, so GLS reduces
// to least squares on transformed data.
class RemlProfile {
public:
    RemlProfile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<int>& groups)
        : X_(X), y_(y), groups_(groups) {
        const int g = *std::max_element(groups.begin(), groups.end()) + 1;
        sizes_.assign(g, 0);
        mean_x_ = Eigen::MatrixXd::Zero(g, X.cols());
        mean_y_ = Eigen::VectorXd::Zero(g);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            ++sizes_[groups[i]];
            mean_x_.row(groups[i]) += X.row(i);
            mean_y_(groups[i]) += y(i);
        }
        for (int k = 0; k < g; ++k) {
            if (sizes_[k] == 0) continue;
            mean_x_.row(k) /= sizes_[k];
            mean_y_(k) /= sizes_[k];
        }
    }

    struct Eval {
        double ratio = 0.0;
        double loglik = 0.0;
        double sigma2 = 0.0;
        LeastSquares ls;
    };

    Eval evaluate(double ratio) const {
        Eigen::MatrixXd Xt = X_;
        Eigen::VectorXd yt = y_;
        double logdet_v = 0.0;
        std::vector<double> shrink(sizes_.size(), 0.0);
        for (std::size_t k = 0; k < sizes_.size(); ++k) {
            shrink[k] = 1.0 - 1.0 / std::sqrt(1.0 + ratio * sizes_[k]);
            logdet_v += std::log1p(ratio * sizes_[k]);
        }
        if (ratio > 0.0) {
            for (Eigen::Index i = 0; i < Xt.rows(); ++i) {
                const int k = groups_[i];
                Xt.row(i) -= shrink[k] * mean_x_.row(k);
                yt(i) -= shrink[k] * mean_y_(k);
            }
        }
        Eval e;
        e.ratio = ratio;
        e.ls = least_squares(Xt, yt);
        const double dof = static_cast<double>(X_.rows() - X_.cols());
        e.sigma2 = e.ls.rss / dof;
        e.loglik = reml_value(dof, e.sigma2, logdet_v, e.ls.logdet_xtx);
        return e;
    }

private:
    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& y_;
    const std::vector<int>& groups_;
    std::vector<int> sizes_;
    Eigen::MatrixXd mean_x_;
    Eigen::VectorXd mean_y_;
};

void check_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw ValidationError("X and y have different row counts");
    if (X.rows() <= X.cols())
        throw EstimabilityError(fmt::format("{} observations leave no residual degrees of freedom for {} coefficients",
                                            X.rows(), X.cols()));
    if (!X.allFinite() || !y.allFinite()) throw ValidationError("design or response contains non-finite values");
}

}  // namespace

FitResult fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    check_inputs(X, y);
    const auto names = default_names(X.cols());
    check_full_rank(X, names);
    const auto ls = least_squares(X, y);
    FitResult fit;
    fit.method = "ols";
    fit.names = names;
    fit.beta = ls.beta;
    fit.n_observations = static_cast<int>(X.rows());
    const double dof = static_cast<double>(fit.df_residual());
    fit.exact_fit = is_exact(ls.rss, y);
    if (fit.exact_fit) {
        fit.covariance = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    } else {
        fit.sigma2_residual = ls.rss / dof;
        fit.covariance = fit.sigma2_residual * ls.xtx_inv;
        fit.log_likelihood = reml_value(dof, fit.sigma2_residual, 0.0, ls.logdet_xtx);
    }
    return fit;
}

FitResult fit_ols(const Design& d) {
    FitResult fit = fit_ols(d.X, d.y);
    fit.names = d.column_names;
    fit.n_subjects = static_cast<int>(d.group_names.size());
    fit.task = d.task;
    return fit;
}

double restricted_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<int>& groups,
                         double variance_ratio) {
    if (variance_ratio < 0.0) throw ValidationError("variance ratio must be >= 0");
    return RemlProfile(X, y, groups).evaluate(variance_ratio).loglik;
}

FitResult fit_random_intercept(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<int>& groups) {
    check_inputs(X, y);
    if (static_cast<Eigen::Index>(groups.size()) != X.rows())
        throw ValidationError("group vector length differs from row count");
    if (std::any_of(groups.begin(), groups.end(), [](int g) { return g < 0; }))
        throw ValidationError("group indices must be >= 0");
    const int n_groups = count_groups(groups);
    if (n_groups < 2) throw ValidationError("random intercept needs at least 2 groups");

    FitResult ols = fit_ols(X, y);
    ols.n_subjects = n_groups;
    if (ols.exact_fit) {
        // Residuals vanish for every ratio; the boundary solution is the OLS one.
        ols.method = "random_intercept";
        return ols;
    }

    const RemlProfile profile(X, y, groups);
    std::vector<std::pair<double, double>> trace;
    int evaluations = 0;
    auto eval = [&](double ratio) {
        auto e = profile.evaluate(ratio);
        trace.emplace_back(ratio, e.loglik);
        ++evaluations;
        return e;
    };

    // Coarse scan over the ratio on a log grid, then golden-section search
    // inside the bracket around the best grid point.
    std::vector<double> grid{0.0};
    for (int k = 0; k <= 44; ++k) grid.push_back(std::pow(10.0, -6.0 + 0.25 * k));
    std::vector<double> values;
    for (double g : grid) values.push_back(eval(g).loglik);
    std::size_t best = std::max_element(values.begin(), values.end()) - values.begin();
    while (best == grid.size() - 1) {
        if (grid.back() > 1e12)
            throw ConvergenceError("variance ratio diverges; residual variance collapses", trace);
        grid.push_back(grid.back() * 10.0);
        values.push_back(eval(grid.back()).loglik);
        best = std::max_element(values.begin(), values.end()) - values.begin();
    }

    constexpr int kMaxIterations = 500;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = best == 0 ? 0.0 : grid[best - 1];
    double hi = grid[best + 1];
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = eval(x1).loglik;
    double f2 = eval(x2).loglik;
    double prev_best = std::max(f1, f2);
    bool converged = false;
    while (evaluations < kMaxIterations) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1).loglik;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2).loglik;
        }
        const double cur_best = std::max(f1, f2);
        const bool ll_stable = std::abs(cur_best - prev_best) < 1e-10;
        const bool narrow = (hi - lo) < 1e-9 * (1.0 + 0.5 * (lo + hi));
        prev_best = cur_best;
        if (ll_stable && narrow) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError(fmt::format("REML search did not converge in {} evaluations", kMaxIterations), trace);

    double ratio = f1 >= f2 ? x1 : x2;
    auto final_eval = profile.evaluate(ratio);
    if (lo == 0.0 || best == 0) {
        const auto at_zero = profile.evaluate(0.0);
        if (at_zero.loglik >= final_eval.loglik) final_eval = at_zero;
    }

    FitResult fit;
    fit.method = "random_intercept";
    fit.names = ols.names;
    fit.beta = final_eval.ls.beta;
    fit.sigma2_residual = final_eval.sigma2;
    fit.sigma2_intercept = final_eval.ratio * final_eval.sigma2;
    fit.covariance = final_eval.sigma2 * final_eval.ls.xtx_inv;
    fit.log_likelihood = final_eval.loglik;
    fit.n_observations = ols.n_observations;
    fit.n_subjects = n_groups;
    fit.iterations = evaluations;
    return fit;
}

FitResult fit_random_intercept(const Design& d) {
    FitResult fit = fit_random_intercept(d.X, d.y, d.groups);
    fit.names = d.column_names;
    fit.task = d.task;
    return fit;
}

FitResult fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y01) {
    check_inputs(X, y01);
    for (Eigen::Index i = 0; i < y01.size(); ++i)
        if (y01(i) != 0.0 && y01(i) != 1.0) throw ValidationError("logistic outcome must be 0 or 1");
    const auto names = default_names(X.cols());
    check_full_rank(X, names);

    const auto n = X.rows();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
    double prev_ll = -std::numeric_limits<double>::infinity();
    constexpr int kMaxIterations = 100;
    for (int iter = 1; iter <= kMaxIterations; ++iter) {
        const Eigen::VectorXd eta = X * beta;
        Eigen::VectorXd mu(n), w(n), z(n);
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            mu(i) = 1.0 / (1.0 + std::exp(-eta(i)));
            w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-12);
            z(i) = eta(i) + (y01(i) - mu(i)) / w(i);
            ll += y01(i) == 1.0 ? std::log(std::max(mu(i), 1e-300)) : std::log(std::max(1.0 - mu(i), 1e-300));
        }
        if (std::abs(ll - prev_ll) < 1e-10 && iter > 1) {
            const Eigen::VectorXd sw = w.cwiseSqrt();
            const auto ls = least_squares(sw.asDiagonal() * X, Eigen::VectorXd::Zero(n));
            FitResult fit;
            fit.method = "logistic";
            fit.names = names;
            fit.beta = beta;
            fit.covariance = ls.xtx_inv;
            fit.sigma2_residual = 1.0;
            fit.log_likelihood = ll;
            fit.n_observations = static_cast<int>(n);
            fit.iterations = iter;
            return fit;
        }
        if (beta.cwiseAbs().maxCoeff() > 50.0)
            throw ConvergenceError("logistic fit diverges (complete or quasi-complete separation)", {});
        prev_ll = ll;
        const Eigen::VectorXd sw = w.cwiseSqrt();
        beta = least_squares(sw.asDiagonal() * X, sw.cwiseProduct(z)).beta;
    }
    throw ConvergenceError(fmt::format("logistic IRLS did not converge in {} iterations", kMaxIterations), {});
}

}  // namespace cascade
