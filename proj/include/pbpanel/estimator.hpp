#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

#include "pbpanel/cointreg.hpp"
#include "pbpanel/panel.hpp"
#include "pbpanel/pb.hpp"
#include "pbpanel/pmg.hpp"

namespace pbpanel {

enum class EstimatorId { pb, pmg, pdols, fmols };
enum class CorrectionMethod { none, jackknife, bootstrap };

inline std::string estimator_name(EstimatorId id) {
    switch (id) {
        case EstimatorId::pb: return "pb";
        case EstimatorId::pmg: return "pmg";
        case EstimatorId::pdols: return "pdols";
        case EstimatorId::fmols: return "fmols";
    }
    return "?";
}

inline std::string correction_name(CorrectionMethod c) {
    switch (c) {
        case CorrectionMethod::none: return "none";
        case CorrectionMethod::jackknife: return "jackknife";
        case CorrectionMethod::bootstrap: return "bootstrap";
    }
    return "?";
}

struct EstimatorOptions {
    double pmg_tol = 1e-4;
    int pmg_max_iter = 1000;
    int leads = 1;
    int lags = 1;
    int bandwidth = -1;  // -1 = automatic
};

// Uniform fit surface consumed by the bias-correction and Monte Carlo
// machinery.
struct FitResult {
    EstimatorId id = EstimatorId::pb;
    VectorXd beta;  // k
    VectorXd se;    // k
    bool converged = true;
    MatrixXd per_unit_beta;  // FMOLS only
    MatrixXd per_unit_se;    // FMOLS only

    // t statistic for H0: beta_j = beta0_j, per coefficient. FMOLS uses the
    // group-mean construction, the others the Wald ratio.
    VectorXd tstats(const VectorXd& beta0) const {
        if (id == EstimatorId::fmols) {
            CointRegResult fm;
            fm.per_unit_beta = per_unit_beta;
            fm.per_unit_se = per_unit_se;
            return fmols_group_t(fm, beta0);
        }
        return (beta - beta0).cwiseQuotient(se);
    }
};

inline FitResult fit_estimator(const PanelDataset& panel, EstimatorId id,
                               const EstimatorOptions& opts = {}) {
    FitResult out;
    out.id = id;
    switch (id) {
        case EstimatorId::pb: {
            const PbResult r = pb_estimate(panel);
            out.beta = r.beta_hat;
            out.se = r.se;
            break;
        }
        case EstimatorId::pmg: {
            PmgResult r = pmg_estimate(panel, opts.pmg_tol, opts.pmg_max_iter);
            pmg_variance(panel, r);
            out.beta = r.beta_hat;
            out.se = r.se;
            out.converged = r.converged;
            break;
        }
        case EstimatorId::pdols: {
            const CointRegResult r = pdols_estimate(panel, opts.leads, opts.lags, opts.bandwidth);
            out.beta = r.beta_hat;
            out.se = r.se;
            break;
        }
        case EstimatorId::fmols: {
            const CointRegResult r = fmols_group_mean(panel, opts.bandwidth);
            out.beta = r.beta_hat;
            out.se = r.se;
            out.per_unit_beta = r.per_unit_beta;
            out.per_unit_se = r.per_unit_se;
            break;
        }
    }
    if (!out.beta.allFinite())
        throw EstimationError(estimator_name(id) + ": estimate is not finite");
    return out;
}

}  // namespace pbpanel
