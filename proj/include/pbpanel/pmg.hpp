#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "pbpanel/linalg.hpp"
#include "pbpanel/panel.hpp"
#include "pbpanel/pb.hpp"

namespace pbpanel {

struct PmgResult {
    VectorXd beta_hat;    // k
    VectorXd phi_hat;     // n error-correction loadings
    VectorXd sigma2_hat;  // n
    MatrixXd omega_pmg;   // k x k
    VectorXd se;          // k
    int iterations = 0;
    bool converged = false;
    bool psd_warning = false;  // wrong-signed loadings make omega_pmg non-PSD
    double mean_T = 0.0;
};

namespace detail {

// Per-unit arrays with the deterministic block projected out. D_i stacks the
// regressor differences and an intercept column, so H_x annihilates both.
struct PmgUnit {
    VectorXd dy_s;    // H_x dy
    VectorXd ym1_s;   // H_x y_{-1}
    MatrixXd X_s;     // H_x X (levels)
    MatrixXd r_hat;   // T^-2 X'H_x X
    double T = 0.0;
};

inline PmgUnit make_pmg_unit(const UnitSeries& u) {
    const long t_eff = u.n_effective();
    const int k = static_cast<int>(u.X.cols());
    const VectorXd y_eff = u.y.tail(t_eff);
    const VectorXd y_lag = u.y.head(t_eff);
    const MatrixXd X_eff = u.X.bottomRows(t_eff);
    const MatrixXd dX = X_eff - u.X.topRows(t_eff);

    MatrixXd D(t_eff, k + 1);
    D.leftCols(k) = dX;
    D.col(k).setOnes();
    Eigen::ColPivHouseholderQR<MatrixXd> qr(D);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < D.cols())
        throw EstimationError("unit '" + u.unit_id + "': dX block is rank deficient");
    const MatrixXd QD = qr.householderQ() * MatrixXd::Identity(t_eff, D.cols());

    auto project = [&](const auto& v) { return (v - QD * (QD.transpose() * v)).eval(); };

    PmgUnit out;
    out.dy_s = project((y_eff - y_lag).eval());
    out.ym1_s = project(y_lag);
    out.X_s = project(X_eff);
    out.T = static_cast<double>(t_eff);
    out.r_hat = out.X_s.transpose() * out.X_s / (out.T * out.T);
    return out;
}

}  // namespace detail

// Pooled static least squares of demeaned y on demeaned X: the starting
// value of the PMG iteration.
inline VectorXd pooled_engle_granger(const PanelDataset& panel) {
    MatrixXd Sxx = MatrixXd::Zero(panel.k, panel.k);
    VectorXd Sxy = VectorXd::Zero(panel.k);
    for (const auto& u : panel.units) {
        const long t_eff = u.n_effective();
        const MatrixXd Xt = demean_columns(u.X.bottomRows(t_eff));
        const VectorXd yt = demean(u.y.tail(t_eff));
        Sxx += Xt.transpose() * Xt;
        Sxy += Xt.transpose() * yt;
    }
    const MatrixXd Sxx_inv = detail::invert_spd(Sxx, "pooled Engle-Granger moment matrix");
    return Sxx_inv * Sxy;
}

// Iterative concentrated PMG: beta-step pooled across units with weights
// phi^2/sigma^2, then per-unit (phi, sigma^2) given beta, until the beta
// iterates settle. Non-convergence is reported through the flag, not thrown.
inline PmgResult pmg_estimate(const PanelDataset& panel, double tol = 1e-4,
                              int max_iter = 1000) {
    const int n = panel.n_units();
    const int k = panel.k;
    std::vector<detail::PmgUnit> units;
    units.reserve(n);
    for (const auto& u : panel.units) units.push_back(detail::make_pmg_unit(u));

    PmgResult res;
    res.phi_hat.resize(n);
    res.sigma2_hat.resize(n);
    res.mean_T = panel.mean_effective_T();

    VectorXd beta = pooled_engle_granger(panel);

    auto unit_step = [&](int i, const VectorXd& b) {
        const auto& u = units[i];
        const VectorXd xi = u.ym1_s - u.X_s * b;
        const double xx = xi.squaredNorm();
        const double phi = xx > 0.0 ? xi.dot(u.dy_s) / xx : 0.0;  // phi=0 allowed
        const double sigma2 = (u.dy_s - phi * xi).squaredNorm() / u.T;
        res.phi_hat(i) = phi;
        // floor keeps exact-fit units finite; it cancels between the beta-step sums
        res.sigma2_hat(i) = std::max(sigma2, 1e-100);
    };

    for (int iter = 1; iter <= max_iter; ++iter) {
        for (int i = 0; i < n; ++i) unit_step(i, beta);

        MatrixXd A = MatrixXd::Zero(k, k);
        VectorXd b = VectorXd::Zero(k);
        for (int i = 0; i < n; ++i) {
            const auto& u = units[i];
            const double phi = res.phi_hat(i);
            const double w = phi * phi / res.sigma2_hat(i);
            A += w * (u.X_s.transpose() * u.X_s);
            b += (phi / res.sigma2_hat(i)) *
                 (u.X_s.transpose() * (u.dy_s - phi * u.ym1_s));
        }
        const MatrixXd A_inv = detail::invert_spd(A, "PMG beta-step moment matrix");
        const VectorXd beta_next = -(A_inv * b);

        res.iterations = iter;
        const double step = (beta_next - beta).cwiseAbs().maxCoeff();
        // The reported (phi, sigma^2) stay the ones that produced the final
        // beta, so the reported triple satisfies the beta equation exactly.
        beta = beta_next;
        if (step < tol) {
            res.converged = true;
            break;
        }
    }
    res.beta_hat = beta;
    return res;
}

// Omega_PMG = (n^-1 sum_i (-phi_i/sigma_i^2) r_i)^-1; PSD when all loadings
// are correctly signed (phi_i < 0), flagged otherwise.
inline std::pair<MatrixXd, VectorXd> pmg_variance(const PanelDataset& panel, PmgResult& res) {
    const int n = panel.n_units();
    MatrixXd S = MatrixXd::Zero(panel.k, panel.k);
    for (int i = 0; i < n; ++i) {
        const auto u = detail::make_pmg_unit(panel.units[i]);
        S += (-res.phi_hat(i) / res.sigma2_hat(i)) * u.r_hat;
    }
    S /= static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()));
    if (es.eigenvalues().minCoeff() <= 0.0) res.psd_warning = true;
    if (es.eigenvalues().cwiseAbs().minCoeff() <
        kRankTolerance * es.eigenvalues().cwiseAbs().maxCoeff())
        throw EstimationError("Omega_PMG: aggregated moment matrix is singular");

    res.omega_pmg = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                    es.eigenvectors().transpose();
    res.omega_pmg = 0.5 * (res.omega_pmg + res.omega_pmg.transpose()).eval();
    res.se = detail::se_from_cov(res.omega_pmg, res.mean_T, static_cast<double>(n));
    return {res.omega_pmg, res.se};
}

}  // namespace pbpanel
