#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pbpanel/bias.hpp"
#include "pbpanel/dgp.hpp"
#include "pbpanel/estimator.hpp"
#include "pbpanel/parallel.hpp"

namespace pbpanel {

struct McCell {
    EstimatorId estimator = EstimatorId::pb;
    CorrectionMethod correction = CorrectionMethod::none;
    int n = 0, T = 0;
    double bias = 0.0, rmse = 0.0, size = 0.0, power = 0.0;
    int reps_used = 0;
    int failures = 0;
};

struct McSummary {
    std::vector<McCell> cells;
    DgpConfig config;
    int R_mc = 0, R_b = 0;
    double null_beta = 1.0, alt_beta = 0.9, level = 0.05;
};

struct ExperimentOptions {
    std::vector<EstimatorId> estimators = {EstimatorId::pb};
    std::vector<CorrectionMethod> corrections = {CorrectionMethod::none};
    int R_mc = 100;
    int R_b = 199;
    double null_beta = 1.0;
    double alt_beta = 0.9;
    double level = 0.05;
    CenterMode center = CenterMode::bhat;
    double epsilon = 2.0;
    EstimatorOptions estimator;
    unsigned workers = 0;  // 0 = hardware concurrency
};

// Monte Carlo driver. Replications are independent jobs with counter-based
// seeds and slot-indexed storage, then reduced in replication order, so the
// summary is identical for any worker count.
inline McSummary run_experiment(const DgpConfig& config, const ExperimentOptions& opts) {
    validate(config);
    if (opts.R_mc < 1) throw std::invalid_argument("run_experiment: R_mc must be >= 1");

    const std::size_t n_cells = opts.estimators.size() * opts.corrections.size();
    struct RepOutcome {
        bool ok = false;
        double beta_tilde = 0.0;
        bool rej_null = false, rej_alt = false;
    };
    std::vector<std::vector<RepOutcome>> grid(
        static_cast<std::size_t>(opts.R_mc), std::vector<RepOutcome>(n_cells));

    VectorXd null_beta(1), alt_beta(1);
    null_beta << opts.null_beta;
    alt_beta << opts.alt_beta;

    parallel_for(static_cast<std::size_t>(opts.R_mc), opts.workers, [&](std::size_t rep) {
        const std::uint64_t rep_seed = derive_seed(config.seed, 1 + rep);
        const PanelDraw draw = generate_panel(config, rep_seed);
        std::size_t cell = 0;
        for (std::size_t ei = 0; ei < opts.estimators.size(); ++ei) {
            const EstimatorId id = opts.estimators[ei];
            FitResult fit;
            bool fit_ok = true;
            try {
                fit = fit_estimator(draw.panel, id, opts.estimator);
            } catch (const std::exception&) {
                fit_ok = false;
            }
            for (std::size_t ci = 0; ci < opts.corrections.size(); ++ci, ++cell) {
                RepOutcome& slot = grid[rep][cell];
                if (!fit_ok) continue;
                try {
                    const std::uint64_t boot_seed = derive_seed(rep_seed, 0xB001ull + cell);
                    const CorrectionPipeline p = run_correction(
                        draw.panel, id, opts.corrections[ci], opts.R_b, boot_seed, opts.level,
                        opts.center, opts.epsilon, opts.estimator, 1, &fit);
                    slot.ok = true;
                    slot.beta_tilde = p.beta_tilde(0);
                    slot.rej_null = p.reject(null_beta)[0];
                    slot.rej_alt = p.reject(alt_beta)[0];
                } catch (const std::exception&) {
                    // counted as a failure below
                }
            }
        }
    });

    McSummary summary;
    summary.config = config;
    summary.R_mc = opts.R_mc;
    summary.R_b = opts.R_b;
    summary.null_beta = opts.null_beta;
    summary.alt_beta = opts.alt_beta;
    summary.level = opts.level;

    std::size_t cell = 0;
    for (std::size_t ei = 0; ei < opts.estimators.size(); ++ei) {
        for (std::size_t ci = 0; ci < opts.corrections.size(); ++ci, ++cell) {
            McCell c;
            c.estimator = opts.estimators[ei];
            c.correction = opts.corrections[ci];
            c.n = config.n;
            c.T = config.T;
            double sum = 0.0, sum_sq = 0.0;
            int used = 0, rej_null = 0, rej_alt = 0;
            for (int rep = 0; rep < opts.R_mc; ++rep) {
                const RepOutcome& o = grid[rep][cell];
                if (!o.ok) continue;
                ++used;
                const double dev = o.beta_tilde - config.beta;
                sum += dev;
                sum_sq += dev * dev;
                rej_null += o.rej_null ? 1 : 0;
                rej_alt += o.rej_alt ? 1 : 0;
            }
            c.reps_used = used;
            c.failures = opts.R_mc - used;
            if (used > 0) {
                c.bias = sum / used;
                c.rmse = std::sqrt(sum_sq / used);
                c.size = static_cast<double>(rej_null) / used;
                c.power = static_cast<double>(rej_alt) / used;
            }
            summary.cells.push_back(c);
        }
    }
    return summary;
}

}  // namespace pbpanel
