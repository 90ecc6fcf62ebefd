#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pbpanel/estimator.hpp"
#include "pbpanel/linalg.hpp"
#include "pbpanel/panel.hpp"
#include "pbpanel/parallel.hpp"
#include "pbpanel/pb.hpp"
#include "pbpanel/rng.hpp"
#include "pbpanel/stats.hpp"

namespace pbpanel {

// kappa = 1/(2^eps - 1): weight that cancels an O(T^-eps) bias when combining
// the full sample with half samples of length T/2.
inline double jackknife_kappa(double epsilon) {
    if (!(epsilon > 0.0)) throw EstimationError("jackknife_kappa: epsilon must be positive");
    return 1.0 / (std::pow(2.0, epsilon) - 1.0);
}

enum class CenterMode { bhat, zero };

struct CorrectedEstimate {
    VectorXd beta_tilde;
    CorrectionMethod method = CorrectionMethod::none;
    double kappa = 0.0;
    double critical_value = std::numeric_limits<double>::quiet_NaN();
    MatrixXd ci;  // k x 2, filled once a critical value is available
};

// beta_tilde = beta - kappa*((beta_a + beta_b)/2 - beta) given a precomputed
// full-sample estimate.
inline VectorXd jackknife_beta(const PanelDataset& panel, EstimatorId id,
                               const VectorXd& beta_full, double epsilon = 2.0,
                               const EstimatorOptions& opts = {}) {
    const double kappa = jackknife_kappa(epsilon);
    const auto [first, second] = split_panel(panel);
    VectorXd beta_a, beta_b;
    try {
        beta_a = fit_estimator(first, id, opts).beta;
    } catch (const std::exception& e) {
        throw EstimationError("first half-sample: " + std::string(e.what()));
    }
    try {
        beta_b = fit_estimator(second, id, opts).beta;
    } catch (const std::exception& e) {
        throw EstimationError("second half-sample: " + std::string(e.what()));
    }
    return beta_full - kappa * (0.5 * (beta_a + beta_b) - beta_full);
}

inline CorrectedEstimate jackknife_correct(const PanelDataset& panel, EstimatorId id,
                                           double epsilon = 2.0,
                                           const EstimatorOptions& opts = {}) {
    CorrectedEstimate out;
    out.method = CorrectionMethod::jackknife;
    out.kappa = jackknife_kappa(epsilon);
    const VectorXd beta_full = fit_estimator(panel, id, opts).beta;
    out.beta_tilde = jackknife_beta(panel, id, beta_full, epsilon, opts);
    return out;
}

// Jackknife variance for the PB estimator:
// omega_v_tilde = n^-1 sum_i (g_i/T_i)(g_i/T_i)' with
// g_i = [(1+kappa) X'M - 2 kappa X_ab'M_ab] vtilde*_i and
// vtilde*_i = M_i(y_i - X_i beta_tilde). The half-sample rows partition the
// full-sample effective rows, so the stacked half operator aligns 1:1.
inline std::pair<MatrixXd, MatrixXd> jackknife_variance(const PanelDataset& panel,
                                                        const VectorXd& beta_tilde,
                                                        double kappa) {
    const int k = panel.k;
    const double n = static_cast<double>(panel.n_units());
    MatrixXd omega_v = MatrixXd::Zero(k, k);
    MatrixXd omega_x = MatrixXd::Zero(k, k);
    for (const auto& raw : panel.units) {
        const BewleyUnit bu(raw);
        const auto [ua, ub] = split_unit(raw);
        const BewleyUnit bua(ua), bub(ub);
        const double T = static_cast<double>(bu.t_eff());

        const auto& Z = bu.instruments();
        const VectorXd r = Z.y_tilde - Z.X_tilde * beta_tilde;
        const VectorXd v_star = bu.Mv(r);
        const long Ta = bua.t_eff();

        VectorXd g = (1.0 + kappa) * bu.xM(r);  // X'M v* = X'M r
        g -= 2.0 * kappa * (bua.xM(v_star.head(Ta)) + bub.xM(v_star.tail(v_star.size() - Ta)));
        omega_v += (g / T) * (g / T).transpose();
        omega_x += bu.xMx() / (T * T);
    }
    omega_v /= n;
    omega_x /= n;
    const MatrixXd omega_x_inv = detail::invert_spd(omega_x, "omega_x^2");
    MatrixXd cov = omega_x_inv * omega_v * omega_x_inv;
    cov = 0.5 * (cov + cov.transpose()).eval();
    return {omega_v, cov};
}

struct BootstrapOptions {
    CenterMode center = CenterMode::bhat;
    bool jackknife_replicates = false;  // jackknife-correct each replicate estimate
    double epsilon = 2.0;
    EstimatorOptions estimator;
    unsigned workers = 1;
    bool record_draws = false;
    double max_drop_fraction = 0.05;
};

struct BootstrapDraws {
    MatrixXd beta_r;  // R x k replicate estimates (jackknifed when requested)
    MatrixXd se_r;    // R x k replicate standard errors
    VectorXd b_hat;   // column mean of beta_r minus beta_full
    int R = 0;
    int requested_R = 0;
    int dropped = 0;
    std::uint64_t seed = 0;
    EstimatorId estimator_id = EstimatorId::pb;
    bool replicates_corrected = false;
    VectorXd beta_full;
    long draw_t0 = 0;
    std::vector<std::vector<std::int8_t>> draw_log;  // per kept replicate, signs by period
};

namespace detail {

// Parameters of the Eq.-(1) recursion recovered by least squares given beta.
struct RecursionUnit {
    double c_hat = 0.0;
    double alpha_hat = 0.0;
    VectorXd u_y;  // T_eff residuals
    MatrixXd u_x;  // T_eff x k observed regressor differences
};

inline RecursionUnit fit_recursion_unit(const UnitSeries& u, const VectorXd& beta) {
    const long t_eff = u.n_effective();
    const VectorXd dy = u.y.tail(t_eff) - u.y.head(t_eff);
    const VectorXd ec = u.y.head(t_eff) - u.X.topRows(t_eff) * beta;

    // dy on [1, ec]: coefficients (c, -alpha)
    const double T = static_cast<double>(t_eff);
    const double ec_mean = ec.mean();
    const double dy_mean = dy.mean();
    const double s_ee = (ec.array() - ec_mean).square().sum();
    if (s_ee <= kRankTolerance * T * std::max(1.0, ec_mean * ec_mean))
        throw EstimationError("bootstrap: error-correction term degenerate in unit '" +
                              u.unit_id + "'");
    const double slope = (ec.array() - ec_mean).cwiseProduct(dy.array() - dy_mean).sum() / s_ee;

    RecursionUnit out;
    out.alpha_hat = -slope;
    out.c_hat = dy_mean - slope * ec_mean;
    out.u_y = dy.array() - (out.c_hat + slope * ec.array());
    out.u_x = u.X.bottomRows(t_eff) - u.X.topRows(t_eff);
    return out;
}

}  // namespace detail

// Sieve wild bootstrap of Eqs. (1)-(2): one Rademacher sign per period shared
// by every unit (this is what preserves any cross-sectional dependence of the
// residual vectors), series rebuilt by the model recursion from the observed
// initial values with beta set to beta_hat.
inline BootstrapDraws sieve_wild_bootstrap(const PanelDataset& panel, const VectorXd& beta_hat,
                                           EstimatorId estimator_id, int R, std::uint64_t seed,
                                           const BootstrapOptions& opts = {}) {
    if (R < 1) throw EstimationError("sieve_wild_bootstrap: R must be >= 1");
    const int k = panel.k;

    std::vector<detail::RecursionUnit> rec;
    rec.reserve(panel.units.size());
    for (const auto& u : panel.units) rec.push_back(detail::fit_recursion_unit(u, beta_hat));

    long t_lo = std::numeric_limits<long>::max();
    long t_hi = std::numeric_limits<long>::min();
    for (const auto& u : panel.units) {
        t_lo = std::min(t_lo, u.t0 + 1);
        t_hi = std::max(t_hi, u.t0 + u.n_obs() - 1);
    }
    const long n_periods = t_hi - t_lo + 1;

    struct Slot {
        bool ok = false;
        VectorXd beta, se;
        std::vector<std::int8_t> signs;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(R));

    parallel_for(static_cast<std::size_t>(R), opts.workers, [&](std::size_t r) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        std::vector<std::int8_t> signs(static_cast<std::size_t>(n_periods));
        for (auto& s : signs) s = static_cast<std::int8_t>(rng.rademacher());

        std::vector<UnitSeries> rebuilt;
        rebuilt.reserve(panel.units.size());
        for (std::size_t i = 0; i < panel.units.size(); ++i) {
            const auto& u = panel.units[i];
            const auto& ru = rec[i];
            const long T_raw = u.n_obs();
            UnitSeries nu;
            nu.unit_id = u.unit_id;
            nu.t0 = u.t0;
            nu.y.resize(T_raw);
            nu.X.resize(T_raw, k);
            nu.y(0) = u.y(0);
            nu.X.row(0) = u.X.row(0);
            for (long l = 1; l < T_raw; ++l) {
                const double a = static_cast<double>(signs[static_cast<std::size_t>(
                    u.t0 + l - t_lo)]);
                nu.X.row(l) = nu.X.row(l - 1) + a * ru.u_x.row(l - 1);
                const double ec = nu.y(l - 1) - nu.X.row(l - 1).dot(beta_hat);
                nu.y(l) = nu.y(l - 1) + ru.c_hat - ru.alpha_hat * ec + a * ru.u_y(l - 1);
            }
            rebuilt.push_back(std::move(nu));
        }

        try {
            const PanelDataset rp = make_panel(std::move(rebuilt), panel.regressor_names);
            FitResult fit = fit_estimator(rp, estimator_id, opts.estimator);
            Slot s;
            if (opts.jackknife_replicates) {
                s.beta = jackknife_beta(rp, estimator_id, fit.beta, opts.epsilon, opts.estimator);
                if (estimator_id == EstimatorId::pb) {
                    const auto [ov, cov] =
                        jackknife_variance(rp, s.beta, jackknife_kappa(opts.epsilon));
                    s.se = detail::se_from_cov(cov, rp.mean_effective_T(),
                                               static_cast<double>(rp.n_units()));
                } else {
                    s.se = fit.se;
                }
            } else {
                s.beta = fit.beta;
                s.se = fit.se;
            }
            s.ok = true;
            if (opts.record_draws) s.signs = std::move(signs);
            slots[r] = std::move(s);
        } catch (const std::exception&) {
            // replicate dropped and counted below
        }
    });

    BootstrapDraws out;
    out.requested_R = R;
    out.seed = seed;
    out.estimator_id = estimator_id;
    out.replicates_corrected = opts.jackknife_replicates;
    out.beta_full = beta_hat;
    out.draw_t0 = t_lo;

    int kept = 0;
    for (const auto& s : slots) kept += s.ok ? 1 : 0;
    out.R = kept;
    out.dropped = R - kept;
    if (static_cast<double>(out.dropped) > opts.max_drop_fraction * static_cast<double>(R))
        throw EstimationError("sieve_wild_bootstrap: " + std::to_string(out.dropped) + " of " +
                              std::to_string(R) + " replicates failed");
    if (kept == 0) throw EstimationError("sieve_wild_bootstrap: no replicate succeeded");

    out.beta_r.resize(kept, k);
    out.se_r.resize(kept, k);
    if (opts.record_draws) out.draw_log.reserve(static_cast<std::size_t>(kept));
    int row = 0;
    for (auto& s : slots) {
        if (!s.ok) continue;
        out.beta_r.row(row) = s.beta.transpose();
        out.se_r.row(row) = s.se.transpose();
        if (opts.record_draws) out.draw_log.push_back(std::move(s.signs));
        ++row;
    }
    out.b_hat = out.beta_r.colwise().mean().transpose() - beta_hat;
    return out;
}

struct CriticalValue {
    double value = std::numeric_limits<double>::quiet_NaN();
    bool unreliable = false;  // fewer replicates than 1/level
};

// k_hat: the (1-level) empirical quantile (ceil((1-level) R) order statistic)
// of |t^(r)|, t^(r) = (replicate estimate - bias - center)/se^(r). With k > 1
// coefficients the max-modulus statistic gives one simultaneous critical
// value.
inline CriticalValue bootstrap_critical_value(const BootstrapDraws& draws, double level,
                                              const VectorXd& center) {
    if (!(level > 0.0 && level < 1.0))
        throw EstimationError("bootstrap_critical_value: level must be in (0,1)");
    const int k = static_cast<int>(draws.beta_r.cols());
    std::vector<double> abs_t;
    abs_t.reserve(static_cast<std::size_t>(draws.R));
    for (int r = 0; r < draws.R; ++r) {
        double worst = 0.0;
        for (int j = 0; j < k; ++j) {
            double bt = draws.beta_r(r, j);
            if (!draws.replicates_corrected) bt -= draws.b_hat(j);
            const double t = (bt - center(j)) / draws.se_r(r, j);
            worst = std::max(worst, std::abs(t));
        }
        abs_t.push_back(worst);
    }
    CriticalValue cv;
    cv.value = quantile_order_stat(std::move(abs_t), 1.0 - level);
    cv.unreliable = static_cast<double>(draws.R) < 1.0 / level;
    return cv;
}

// beta_j +/- crit * se_j
inline MatrixXd confidence_interval(const VectorXd& beta_tilde, const VectorXd& se,
                                    double critical_value) {
    if ((se.array() <= 0.0).any())
        throw EstimationError("confidence_interval: standard errors must be positive");
    MatrixXd ci(beta_tilde.size(), 2);
    ci.col(0) = beta_tilde - critical_value * se;
    ci.col(1) = beta_tilde + critical_value * se;
    return ci;
}

// One estimator x correction workflow: point estimate, correction, the se and
// critical value used for inference, and the confidence interval.
struct CorrectionPipeline {
    FitResult full;
    CorrectionMethod method = CorrectionMethod::none;
    VectorXd beta_tilde;
    VectorXd se_used;
    double kappa = 0.0;
    VectorXd b_hat;
    double critical_value = 0.0;
    bool crit_unreliable = false;
    MatrixXd ci;
    int bootstrap_R = 0;
    int bootstrap_dropped = 0;

    // Rejection of H0: beta_j = beta0_j per coefficient. Uncorrected fits use
    // the estimator's native t against the same critical value.
    std::vector<bool> reject(const VectorXd& beta0) const {
        std::vector<bool> out(static_cast<std::size_t>(beta_tilde.size()));
        if (method == CorrectionMethod::none) {
            const VectorXd t = full.tstats(beta0);
            for (long j = 0; j < t.size(); ++j) out[j] = std::abs(t(j)) > critical_value;
        } else {
            for (long j = 0; j < beta_tilde.size(); ++j)
                out[j] = std::abs((beta_tilde(j) - beta0(j)) / se_used(j)) > critical_value;
        }
        return out;
    }
};

inline CorrectionPipeline run_correction(const PanelDataset& panel, EstimatorId id,
                                         CorrectionMethod method, int bootstrap_R,
                                         std::uint64_t seed, double level = 0.05,
                                         CenterMode center = CenterMode::bhat,
                                         double epsilon = 2.0, const EstimatorOptions& opts = {},
                                         unsigned workers = 1,
                                         const FitResult* prefit = nullptr) {
    CorrectionPipeline out;
    out.method = method;
    out.full = prefit ? *prefit : fit_estimator(panel, id, opts);
    const VectorXd& beta_hat = out.full.beta;
    const VectorXd center_vec =
        center == CenterMode::bhat ? beta_hat : VectorXd::Zero(panel.k).eval();

    BootstrapOptions bopts;
    bopts.center = center;
    bopts.epsilon = epsilon;
    bopts.estimator = opts;
    bopts.workers = workers;

    switch (method) {
        case CorrectionMethod::none: {
            out.beta_tilde = beta_hat;
            out.se_used = out.full.se;
            out.critical_value = normal_quantile(1.0 - level / 2.0);
            break;
        }
        case CorrectionMethod::jackknife: {
            out.kappa = jackknife_kappa(epsilon);
            out.beta_tilde = jackknife_beta(panel, id, beta_hat, epsilon, opts);
            if (id == EstimatorId::pb) {
                const auto [ov, cov] = jackknife_variance(panel, out.beta_tilde, out.kappa);
                out.se_used = detail::se_from_cov(cov, panel.mean_effective_T(),
                                                  static_cast<double>(panel.n_units()));
            } else {
                out.se_used = out.full.se;
            }
            bopts.jackknife_replicates = true;
            const BootstrapDraws draws =
                sieve_wild_bootstrap(panel, beta_hat, id, bootstrap_R, seed, bopts);
            const CriticalValue cv = bootstrap_critical_value(draws, level, center_vec);
            out.critical_value = cv.value;
            out.crit_unreliable = cv.unreliable;
            out.bootstrap_R = draws.R;
            out.bootstrap_dropped = draws.dropped;
            break;
        }
        case CorrectionMethod::bootstrap: {
            const BootstrapDraws draws =
                sieve_wild_bootstrap(panel, beta_hat, id, bootstrap_R, seed, bopts);
            out.b_hat = draws.b_hat;
            out.beta_tilde = beta_hat - draws.b_hat;
            out.se_used = out.full.se;
            const CriticalValue cv = bootstrap_critical_value(draws, level, center_vec);
            out.critical_value = cv.value;
            out.crit_unreliable = cv.unreliable;
            out.bootstrap_R = draws.R;
            out.bootstrap_dropped = draws.dropped;
            break;
        }
    }
    // built directly so exact-fit panels (se = 0) yield degenerate intervals
    out.ci.resize(panel.k, 2);
    out.ci.col(0) = out.beta_tilde - out.critical_value * out.se_used;
    out.ci.col(1) = out.beta_tilde + out.critical_value * out.se_used;
    return out;
}

}  // namespace pbpanel
