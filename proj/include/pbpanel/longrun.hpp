#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "pbpanel/linalg.hpp"

namespace pbpanel {

enum class Kernel { bartlett };

struct LongRunCovariance {
    MatrixXd omega;   // two-sided: G0 + sum_j w_j (G_j + G_j')
    MatrixXd lambda;  // one-sided incl. contemporaneous: G0 + sum_j w_j G_j
    int bandwidth = 0;
    Kernel kernel = Kernel::bartlett;
};

// Newey-West style deterministic bandwidth.
inline int auto_bandwidth(long T) {
    return static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(T) / 100.0, 2.0 / 9.0)));
}

// Bartlett-weighted long-run covariance of the columns of `series`,
// computed on demeaned columns. bandwidth < 0 selects the automatic rule.
inline LongRunCovariance long_run_covariance(const MatrixXd& series, int bandwidth = -1) {
    const long T = series.rows();
    if (T < 1) throw LinalgError("long_run_covariance: empty sample");
    const int B = bandwidth < 0 ? auto_bandwidth(T) : bandwidth;
    if (B >= T)
        throw LinalgError("long_run_covariance: bandwidth " + std::to_string(B) +
                          " >= sample length " + std::to_string(T));

    const MatrixXd w = demean_columns(series);
    const double Td = static_cast<double>(T);

    LongRunCovariance out;
    out.bandwidth = B;
    const MatrixXd G0 = w.transpose() * w / Td;
    out.omega = G0;
    out.lambda = G0;
    for (int j = 1; j <= B; ++j) {
        const double wj = 1.0 - static_cast<double>(j) / static_cast<double>(B + 1);
        // G_j = T^-1 sum_t w_t w_{t-j}'
        const MatrixXd Gj = w.bottomRows(T - j).transpose() * w.topRows(T - j) / Td;
        out.omega += wj * (Gj + Gj.transpose());
        out.lambda += wj * Gj;
    }
    return out;
}

// Clip negative eigenvalues to zero; finite-sample kernels can dip below PSD.
inline MatrixXd psd_clip(const MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (A + A.transpose()));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
           es.eigenvectors().transpose();
}

}  // namespace pbpanel
