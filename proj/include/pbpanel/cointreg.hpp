#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "pbpanel/linalg.hpp"
#include "pbpanel/longrun.hpp"
#include "pbpanel/panel.hpp"
#include "pbpanel/pb.hpp"

namespace pbpanel {

// Shared result type for the two cointegrating-regression comparison
// estimators. per_unit_* is filled by FMOLS only.
struct CointRegResult {
    VectorXd beta_hat;       // k
    VectorXd se;             // k
    MatrixXd per_unit_beta;  // n x k (FMOLS)
    MatrixXd per_unit_se;    // n x k (FMOLS)
    int leads = 0;
    int lags = 0;
    int bandwidth = -1;
};

// Pooled dynamic OLS: common beta on regressor levels, unit-specific
// intercept and leads/lags of the regressor differences projected out.
// leads = lags = 0 degenerates to the static within-unit regression.
inline CointRegResult pdols_estimate(const PanelDataset& panel, int leads = 1, int lags = 1,
                                     int bandwidth = -1) {
    const int k = panel.k;
    const int dx_terms = (leads + lags > 0) ? (leads + lags + 1) : 0;
    const long min_rows = static_cast<long>(k) * dx_terms + k + 2;

    struct UnitArrays {
        MatrixXd X_s;
        VectorXd y_s;
    };
    std::vector<UnitArrays> arr;
    arr.reserve(panel.units.size());
    std::string short_units;
    for (const auto& u : panel.units) {
        const long T_raw = u.n_obs();
        const long first = lags + 1;           // first level index usable as a row
        const long last = T_raw - 1 - leads;   // last usable level index
        const long rows = last - first + 1;
        if (rows < min_rows) {
            if (!short_units.empty()) short_units += ", ";
            short_units += "'" + u.unit_id + "'";
            continue;
        }
        MatrixXd D(rows, 1 + k * dx_terms);
        D.col(0).setOnes();
        int col = 1;
        if (dx_terms > 0) {
            for (int j = -lags; j <= leads; ++j) {
                // dX at t+j for row t
                D.middleCols(col, k) = u.X.middleRows(first + j, rows) -
                                       u.X.middleRows(first + j - 1, rows);
                col += k;
            }
        }
        Eigen::ColPivHouseholderQR<MatrixXd> qr(D);
        qr.setThreshold(kRankTolerance);
        if (qr.rank() < D.cols())
            throw EstimationError("PDOLS: deterministic/difference block rank deficient in unit '" +
                                  u.unit_id + "'");
        const MatrixXd QD = qr.householderQ() * MatrixXd::Identity(rows, D.cols());
        UnitArrays ua;
        const MatrixXd X_lvl = u.X.middleRows(first, rows);
        const VectorXd y_lvl = u.y.segment(first, rows);
        ua.X_s = X_lvl - QD * (QD.transpose() * X_lvl);
        ua.y_s = y_lvl - QD * (QD.transpose() * y_lvl);
        arr.push_back(std::move(ua));
    }
    if (!short_units.empty())
        throw EstimationError("PDOLS: effective sample too short after leads/lags in units " +
                              short_units);

    MatrixXd Sxx = MatrixXd::Zero(k, k);
    VectorXd Sxy = VectorXd::Zero(k);
    for (const auto& ua : arr) {
        Sxx += ua.X_s.transpose() * ua.X_s;
        Sxy += ua.X_s.transpose() * ua.y_s;
    }
    const MatrixXd Sxx_inv = detail::invert_spd(Sxx, "PDOLS pooled moment matrix");

    CointRegResult res;
    res.leads = leads;
    res.lags = lags;
    res.beta_hat = Sxx_inv * Sxy;

    // Sandwich with per-unit long-run residual variances.
    MatrixXd meat = MatrixXd::Zero(k, k);
    for (const auto& ua : arr) {
        const VectorXd resid = ua.y_s - ua.X_s * res.beta_hat;
        const auto lrc = long_run_covariance(resid, bandwidth);
        res.bandwidth = lrc.bandwidth;
        meat += std::max(lrc.omega(0, 0), 0.0) * (ua.X_s.transpose() * ua.X_s);
    }
    const MatrixXd V = Sxx_inv * meat * Sxx_inv;
    res.se = V.diagonal().cwiseMax(0.0).cwiseSqrt();
    return res;
}

// Group-mean fully modified OLS: per-unit endogeneity and serial-correlation
// corrections from the Bartlett long-run covariance of (uhat, dX), then the
// arithmetic mean of the corrected per-unit estimates.
inline CointRegResult fmols_group_mean(const PanelDataset& panel, int bandwidth = -1) {
    const int k = panel.k;
    const int n = panel.n_units();

    CointRegResult res;
    res.per_unit_beta.resize(n, k);
    res.per_unit_se.resize(n, k);

    for (int i = 0; i < n; ++i) {
        const auto& u = panel.units[i];
        const long t_eff = u.n_effective();
        const double Td = static_cast<double>(t_eff);
        const MatrixXd X_lvl = u.X.bottomRows(t_eff);
        const MatrixXd dX = X_lvl - u.X.topRows(t_eff);
        const MatrixXd Xt = demean_columns(X_lvl);
        const VectorXd yt = demean(u.y.tail(t_eff));

        const MatrixXd Sxx = Xt.transpose() * Xt;
        const MatrixXd Sxx_inv =
            detail::invert_spd(Sxx, "FMOLS X'X in unit '" + u.unit_id + "'");
        const VectorXd beta_ols = Sxx_inv * (Xt.transpose() * yt);
        const VectorXd uhat = yt - Xt * beta_ols;

        MatrixXd W(t_eff, 1 + k);
        W.col(0) = uhat;
        W.rightCols(k) = dX;
        const auto lrc = long_run_covariance(W, bandwidth);
        res.bandwidth = lrc.bandwidth;
        const MatrixXd omega = psd_clip(lrc.omega);

        const double o_uu = omega(0, 0);
        const VectorXd o_xu = omega.block(1, 0, k, 1);
        const MatrixXd o_xx = omega.block(1, 1, k, k);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(o_xx);
        if (es.eigenvalues().minCoeff() <
            kRankTolerance * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
            throw EstimationError("FMOLS: zero long-run variance of dX in unit '" + u.unit_id +
                                  "'");
        const MatrixXd o_xx_inv = es.eigenvectors() *
                                  es.eigenvalues().cwiseInverse().asDiagonal() *
                                  es.eigenvectors().transpose();

        // endogeneity-corrected outcome and one-sided correction term
        const VectorXd y_plus = yt - dX * (o_xx_inv * o_xu);
        const VectorXd l_xu = lrc.lambda.block(1, 0, k, 1);
        const MatrixXd l_xx = lrc.lambda.block(1, 1, k, k);
        const VectorXd gamma = l_xu - l_xx * (o_xx_inv * o_xu);

        const VectorXd beta_star = Sxx_inv * (Xt.transpose() * y_plus - Td * gamma);
        const double o_cond = std::max(o_uu - o_xu.dot(o_xx_inv * o_xu), 0.0);
        res.per_unit_beta.row(i) = beta_star.transpose();
        res.per_unit_se.row(i) =
            (o_cond * Sxx_inv.diagonal().cwiseMax(0.0)).cwiseSqrt().transpose();
    }

    res.beta_hat = res.per_unit_beta.colwise().mean();
    // se of the group mean from cross-unit independence
    res.se = (res.per_unit_se.array().square().colwise().sum().sqrt() /
              static_cast<double>(n))
                 .transpose();
    return res;
}

// Pedroni-style group-mean t statistic, n^{-1/2} sum_i (beta_i - beta0)/se_i,
// per coefficient.
inline VectorXd fmols_group_t(const CointRegResult& fm, const VectorXd& beta0) {
    const int n = static_cast<int>(fm.per_unit_beta.rows());
    VectorXd t = VectorXd::Zero(beta0.size());
    for (int i = 0; i < n; ++i)
        t += (fm.per_unit_beta.row(i).transpose() - beta0)
                 .cwiseQuotient(fm.per_unit_se.row(i).transpose());
    return t / std::sqrt(static_cast<double>(n));
}

}  // namespace pbpanel
