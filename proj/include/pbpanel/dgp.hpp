#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbpanel/panel.hpp"
#include "pbpanel/rng.hpp"

namespace pbpanel {

// Monte Carlo design: heterogeneous error-correction panels with either
// cross-sectionally independent errors or a multi-factor error structure with
// strong through weak factors.
struct DgpConfig {
    int n = 20;
    int T = 20;  // regression rows; the generator emits T+1 levels (t = 0..T)
    double beta = 1.0;
    double alpha_lo = 0.2, alpha_hi = 0.3;
    double sigma2_lo = 0.8, sigma2_hi = 1.2;
    double rho_lo = 0.3, rho_hi = 0.7;
    bool cross_sectional_dependence = false;
    std::vector<double> factor_exponents = {1.0, 0.9, 0.8, 0.7, 0.6};
    int burn_in = 100;
    std::uint64_t seed = 0;
    bool fix_loadings = false;  // freeze factor loadings across replications
};

inline void validate(const DgpConfig& c) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("DgpConfig: " + msg); };
    if (c.n < 1) fail("n must be positive");
    if (c.T < 5) fail("T too small for the effective-sample rules");
    if (!(c.alpha_lo > 0.0 && c.alpha_hi < 1.0 && c.alpha_lo <= c.alpha_hi))
        fail("alpha range must satisfy 0 < lo <= hi < 1");
    if (!(c.sigma2_lo > 0.0 && c.sigma2_lo <= c.sigma2_hi)) fail("bad sigma^2 range");
    if (!(std::abs(c.rho_lo) <= 1.0 && std::abs(c.rho_hi) <= 1.0 && c.rho_lo <= c.rho_hi))
        fail("rho range must lie in [-1,1]");
    if (c.burn_in < 0) fail("burn_in must be nonnegative");
    if (c.cross_sectional_dependence && c.factor_exponents.empty())
        fail("dependent design needs at least one factor");
}

struct DgpUnitParams {
    double alpha = 0.0;
    double sigma_y2 = 0.0, sigma_x2 = 0.0;
    double rho = 0.0;
    double mu1 = 0.0, mu2 = 0.0;
    double c = 0.0;
    VectorXd gamma;         // factor loadings (dependent design)
    double varkappa = 1.0;  // scaling keeping E(e_y^2) = 1
};

struct PanelDraw {
    PanelDataset panel;
    std::vector<DgpUnitParams> params;
};

// One synthetic panel. The initial level pair follows the model's stationary
// initial-value process: x_0 = mu_2 exactly and y_0 = mu_1 + zeta_0, with
// zeta_0 produced by a burn-in of the stationary deviation recursion
// zeta_t = (1-alpha) zeta_{t-1} + (u_y - beta u_x).
inline PanelDraw generate_panel(const DgpConfig& cfg, std::uint64_t rep_seed) {
    validate(cfg);
    const int m = cfg.cross_sectional_dependence
                      ? static_cast<int>(cfg.factor_exponents.size())
                      : 0;
    Rng rng(rep_seed);

    const long total_t = cfg.burn_in + cfg.T;
    MatrixXd factors;  // one row per shock period, shared across units
    if (m > 0) {
        factors.resize(total_t, m);
        for (long t = 0; t < total_t; ++t)
            for (int l = 0; l < m; ++l) factors(t, l) = rng.normal();
    }

    std::vector<VectorXd> fixed_gamma;
    if (m > 0 && cfg.fix_loadings) {
        Rng lrng(derive_seed(cfg.seed, 0x10ADull));
        fixed_gamma.resize(cfg.n);
        for (int i = 0; i < cfg.n; ++i) {
            VectorXd g(m);
            for (int l = 0; l < m; ++l) {
                const double gmax =
                    2.0 * std::pow(static_cast<double>(cfg.n), cfg.factor_exponents[l] - 1.0);
                g(l) = lrng.uniform(0.0, gmax);
            }
            fixed_gamma[i] = g;
        }
    }

    PanelDraw out;
    out.params.reserve(cfg.n);
    std::vector<UnitSeries> units;
    units.reserve(cfg.n);

    for (int i = 0; i < cfg.n; ++i) {
        DgpUnitParams p;
        p.alpha = rng.uniform(cfg.alpha_lo, cfg.alpha_hi);
        p.sigma_y2 = rng.uniform(cfg.sigma2_lo, cfg.sigma2_hi);
        p.sigma_x2 = rng.uniform(cfg.sigma2_lo, cfg.sigma2_hi);
        p.rho = rng.uniform(cfg.rho_lo, cfg.rho_hi);
        p.mu1 = rng.normal(1.0, 1.0);
        p.mu2 = rng.normal(1.0, 1.0);
        p.c = p.alpha * p.mu1 - p.alpha * cfg.beta * p.mu2;
        if (m > 0) {
            if (cfg.fix_loadings) {
                p.gamma = fixed_gamma[i];
            } else {
                p.gamma.resize(m);
                for (int l = 0; l < m; ++l) {
                    const double gmax =
                        2.0 * std::pow(static_cast<double>(cfg.n), cfg.factor_exponents[l] - 1.0);
                    p.gamma(l) = rng.uniform(0.0, gmax);
                }
            }
            p.varkappa = 1.0 / std::sqrt(1.0 + p.gamma.squaredNorm());
        }

        const double sy = std::sqrt(p.sigma_y2);
        const double sx = std::sqrt(p.sigma_x2);
        const double rho_c = std::sqrt(std::max(0.0, 1.0 - p.rho * p.rho));
        auto draw_errors = [&](long shock_idx, double& u_y, double& u_x) {
            double e_y;
            if (m > 0) {
                const double eps_y = rng.normal();
                e_y = p.varkappa * (eps_y + p.gamma.dot(factors.row(shock_idx)));
            } else {
                e_y = rng.normal();
            }
            const double e_x = p.rho * e_y + rho_c * rng.normal();
            u_y = sy * e_y;
            u_x = sx * e_x;
        };

        double zeta = 0.0;
        for (long s = 0; s < cfg.burn_in; ++s) {
            double u_y, u_x;
            draw_errors(s, u_y, u_x);
            zeta = (1.0 - p.alpha) * zeta + (u_y - cfg.beta * u_x);
        }

        UnitSeries u;
        u.unit_id = std::to_string(i + 1);
        u.t0 = 0;
        u.y.resize(cfg.T + 1);
        u.X.resize(cfg.T + 1, 1);
        u.X(0, 0) = p.mu2;
        u.y(0) = p.mu1 + zeta;
        for (int t = 1; t <= cfg.T; ++t) {
            double u_y, u_x;
            draw_errors(cfg.burn_in - 1 + t, u_y, u_x);
            u.X(t, 0) = u.X(t - 1, 0) + u_x;
            u.y(t) = u.y(t - 1) + p.c -
                     p.alpha * (u.y(t - 1) - cfg.beta * u.X(t - 1, 0)) + u_y;
        }
        units.push_back(std::move(u));
        out.params.push_back(std::move(p));
    }

    out.panel = make_panel(std::move(units));
    return out;
}

}  // namespace pbpanel
