#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbpanel/linalg.hpp"
#include "pbpanel/panel.hpp"

namespace pbpanel {

class EstimationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bewley reparameterization psi = (-(1-alpha)/alpha, delta'/alpha)'.
inline VectorXd ardl_to_bewley(double alpha, const VectorXd& delta) {
    if (alpha == 0.0)
        throw EstimationError("ardl_to_bewley: alpha must be nonzero (adjustment is required)");
    VectorXd psi(delta.size() + 1);
    psi(0) = -(1.0 - alpha) / alpha;
    psi.tail(delta.size()) = delta / alpha;
    return psi;
}

struct PbPerUnit {
    std::string unit_id;
    double alpha_hat = 0.0;
    VectorXd delta_hat;  // k
    double c_hat = 0.0;
    VectorXd psi_hat;  // k+1
};

struct PbResult {
    VectorXd beta_hat;    // k
    MatrixXd omega_x_hat; // k x k
    MatrixXd omega_v_hat; // k x k
    MatrixXd cov;         // k x k, estimate of Omega in T sqrt(n)(b-beta) -> N(0, Omega)
    VectorXd se;          // k, T^-1 n^-1/2 sqrt(diag(cov))
    std::vector<PbPerUnit> per_unit;
    double mean_T = 0.0;  // mean effective T used in the se scaling
};

namespace detail {

inline std::vector<BewleyUnit> build_units(const PanelDataset& panel) {
    std::vector<BewleyUnit> units;
    units.reserve(panel.units.size());
    std::string failures;
    for (const auto& u : panel.units) {
        try {
            units.emplace_back(u);
        } catch (const std::exception& e) {
            if (!failures.empty()) failures += "; ";
            failures += e.what();
        }
    }
    if (!failures.empty()) throw EstimationError("rank check failed: " + failures);
    return units;
}

inline MatrixXd invert_spd(const MatrixXd& A, const std::string& what) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (A + A.transpose()));
    const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    const double lmin = es.eigenvalues().cwiseAbs().minCoeff();
    if (!(lmax > 0.0) || lmin < kRankTolerance * lmax)
        throw EstimationError(what + " is singular");
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

// beta_hat = (sum_i X'M X)^-1 (sum_i X'M y)
inline VectorXd pb_beta(const std::vector<BewleyUnit>& units) {
    const int k = units.front().k();
    MatrixXd Sxx = MatrixXd::Zero(k, k);
    VectorXd Sxy = VectorXd::Zero(k);
    for (const auto& u : units) {
        Sxx += u.xMx();
        Sxy += u.xMy();
    }
    const MatrixXd Sxx_inv = invert_spd(Sxx, "pooled moment matrix sum_i X'M X");
    return Sxx_inv * Sxy;
}

// omega_x, omega_v and the sandwich covariance, per-unit T_i scaling.
struct PbVariance {
    MatrixXd omega_x;
    MatrixXd omega_v;
    MatrixXd cov;
};

inline PbVariance pb_variance_from_units(const std::vector<BewleyUnit>& units,
                                         const VectorXd& beta_hat) {
    const int k = units.front().k();
    const double n = static_cast<double>(units.size());
    MatrixXd omega_x = MatrixXd::Zero(k, k);
    MatrixXd omega_v = MatrixXd::Zero(k, k);
    for (const auto& u : units) {
        const double T = static_cast<double>(u.t_eff());
        omega_x += u.xMx() / (T * T);
        // X'M vhat* = X'M (y - X beta) by idempotency of M
        const VectorXd g = (u.xMy() - u.xMx() * beta_hat) / T;
        omega_v += g * g.transpose();
    }
    omega_x /= n;
    omega_v /= n;
    const MatrixXd omega_x_inv = invert_spd(omega_x, "omega_x^2");
    PbVariance out;
    out.omega_x = omega_x;
    out.omega_v = omega_v;
    out.cov = omega_x_inv * omega_v * omega_x_inv;
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    return out;
}

inline VectorXd se_from_cov(const MatrixXd& cov, double mean_T, double n) {
    return (cov.diagonal().cwiseMax(0.0).cwiseSqrt() / (mean_T * std::sqrt(n))).eval();
}

}  // namespace detail

inline std::tuple<MatrixXd, MatrixXd, MatrixXd> pb_variance(const PanelDataset& panel,
                                                            const VectorXd& beta_hat) {
    if (!beta_hat.allFinite()) throw EstimationError("pb_variance: beta_hat is not finite");
    const auto units = detail::build_units(panel);
    const auto v = detail::pb_variance_from_units(units, beta_hat);
    return {v.omega_x, v.omega_v, v.cov};
}

inline PbResult pb_estimate(const PanelDataset& panel) {
    const auto units = detail::build_units(panel);
    PbResult res;
    res.beta_hat = detail::pb_beta(units);
    const auto v = detail::pb_variance_from_units(units, res.beta_hat);
    res.omega_x_hat = v.omega_x;
    res.omega_v_hat = v.omega_v;
    res.cov = v.cov;
    res.mean_T = panel.mean_effective_T();
    res.se = detail::se_from_cov(res.cov, res.mean_T, static_cast<double>(units.size()));

    // Per-unit nuisance parameters: psi from the IV regression of the
    // long-run residual on dZ, then (alpha, delta, c) inverted from psi.
    res.per_unit.reserve(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        const auto& bu = units[i];
        const auto& Z = bu.instruments();
        PbPerUnit pu;
        pu.unit_id = bu.unit_id();
        pu.psi_hat = bu.iv_on_dz(Z.y_tilde - Z.X_tilde * res.beta_hat);
        pu.alpha_hat = 1.0 / (1.0 - pu.psi_hat(0));
        pu.delta_hat = pu.psi_hat.tail(panel.k) * pu.alpha_hat;

        const auto& raw = panel.units[i];
        const long t_eff = raw.n_effective();
        const double y_bar = raw.y.tail(t_eff).mean();
        const VectorXd x_bar = raw.X.bottomRows(t_eff).colwise().mean();
        const double dy_bar = (raw.y(t_eff) - raw.y(0)) / static_cast<double>(t_eff);
        const VectorXd dx_bar =
            (raw.X.row(t_eff) - raw.X.row(0)).transpose() / static_cast<double>(t_eff);
        VectorXd dz_bar(panel.k + 1);
        dz_bar(0) = dy_bar;
        dz_bar.tail(panel.k) = dx_bar;
        pu.c_hat = pu.alpha_hat *
                   (y_bar - res.beta_hat.dot(x_bar) - pu.psi_hat.dot(dz_bar));
        res.per_unit.push_back(std::move(pu));
    }
    return res;
}

}  // namespace pbpanel
