#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

#include "pbpanel/panel.hpp"

namespace pbpanel {

class LinalgError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kRankTolerance = 1e-10;

// v - mean(v): the action of M_tau = I - tau tau'/T.
inline VectorXd demean(const VectorXd& v) {
    if (v.size() == 0) throw LinalgError("demean: empty vector");
    return v.array() - v.mean();
}

inline MatrixXd demean_columns(const MatrixXd& m) {
    if (m.rows() == 0) throw LinalgError("demean_columns: empty matrix");
    return m.rowwise() - m.colwise().mean();
}

// Demeaned effective-sample arrays for one unit. Row t of the effective
// sample corresponds to period t0+1+t; one leading observation is consumed by
// the lag/difference construction.
struct InstrumentSet {
    MatrixXd H_tilde;   // T_eff x (2k+1): (y_{-1}, X, X_{-1}) demeaned
    MatrixXd dZ_tilde;  // T_eff x (k+1): (dy, dX) demeaned
    VectorXd y_tilde;   // demeaned y levels
    MatrixXd X_tilde;   // demeaned X levels
};

inline InstrumentSet build_instruments(const UnitSeries& unit) {
    const long t_eff = unit.n_effective();
    const int k = static_cast<int>(unit.X.cols());
    if (t_eff < 2L * k + 2)
        throw LinalgError("unit '" + unit.unit_id + "': effective sample " +
                          std::to_string(t_eff) + " too short for " +
                          std::to_string(2 * k + 1) + " instrument columns");

    const VectorXd y_eff = unit.y.tail(t_eff);
    const VectorXd y_lag = unit.y.head(t_eff);
    const MatrixXd X_eff = unit.X.bottomRows(t_eff);
    const MatrixXd X_lag = unit.X.topRows(t_eff);

    MatrixXd H(t_eff, 2 * k + 1);
    H.col(0) = y_lag;
    H.middleCols(1, k) = X_eff;
    H.middleCols(1 + k, k) = X_lag;

    MatrixXd dZ(t_eff, k + 1);
    dZ.col(0) = y_eff - y_lag;
    dZ.rightCols(k) = X_eff - X_lag;

    InstrumentSet out;
    out.H_tilde = demean_columns(H);
    out.dZ_tilde = demean_columns(dZ);
    out.y_tilde = demean(y_eff);
    out.X_tilde = demean_columns(X_eff);
    return out;
}

// P = H (H'H)^-1 H'. Rank is checked through a column-pivoted QR with a
// relative threshold.
inline MatrixXd projection(const MatrixXd& H_tilde, const std::string& unit_id = "") {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(H_tilde);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < H_tilde.cols())
        throw LinalgError("singular instrument matrix" +
                          (unit_id.empty() ? std::string() : " in unit '" + unit_id + "'") +
                          ": rank " + std::to_string(qr.rank()) + " < " +
                          std::to_string(H_tilde.cols()));
    const MatrixXd Q1 =
        qr.householderQ() * MatrixXd::Identity(H_tilde.rows(), H_tilde.cols());
    return Q1 * Q1.transpose();
}

// M = P - P dZ (dZ'P dZ)^-1 dZ'P, so that M dZ = 0 exactly.
inline MatrixXd annihilator(const MatrixXd& P, const MatrixXd& dZ_tilde,
                            const std::string& unit_id = "") {
    const MatrixXd PdZ = P * dZ_tilde;
    const MatrixXd G = dZ_tilde.transpose() * PdZ;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (G + G.transpose()));
    const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    const double lmin = es.eigenvalues().cwiseAbs().minCoeff();
    if (!(lmax > 0.0) || lmin < kRankTolerance * lmax)
        throw LinalgError("near-singular dZ'P dZ" +
                          (unit_id.empty() ? std::string() : " in unit '" + unit_id + "'"));
    return P - PdZ * G.ldlt().solve(PdZ.transpose());
}

// Per-unit factorized Bewley machinery. Equivalent to forming P and M densely
// but works through a thin orthonormal basis of span(H_tilde), so quadratic
// forms like X'M X cost O(T k^2) instead of O(T^2).
class BewleyUnit {
  public:
    explicit BewleyUnit(const UnitSeries& unit) : unit_id_(unit.unit_id) {
        Z_ = build_instruments(unit);
        t_eff_ = Z_.y_tilde.size();
        k_ = static_cast<int>(Z_.X_tilde.cols());

        Eigen::ColPivHouseholderQR<MatrixXd> qr(Z_.H_tilde);
        qr.setThreshold(kRankTolerance);
        if (qr.rank() < Z_.H_tilde.cols())
            throw LinalgError("singular instrument matrix in unit '" + unit_id_ + "': rank " +
                              std::to_string(qr.rank()) + " < " +
                              std::to_string(Z_.H_tilde.cols()));
        Q1_ = qr.householderQ() * MatrixXd::Identity(t_eff_, Z_.H_tilde.cols());

        B_ = Q1_.transpose() * Z_.dZ_tilde;  // so dZ'P dZ = B'B
        const MatrixXd G = B_.transpose() * B_;
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
        const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
        const double lmin = es.eigenvalues().cwiseAbs().minCoeff();
        if (!(lmax > 0.0) || lmin < kRankTolerance * lmax)
            throw LinalgError("near-singular dZ'P dZ in unit '" + unit_id_ + "'");
        G_ldlt_.compute(G);

        Ax_ = Q1_.transpose() * Z_.X_tilde;  // (2k+1) x k
        ay_ = Q1_.transpose() * Z_.y_tilde;
        Cx_ = B_.transpose() * Ax_;  // (k+1) x k
        cy_ = B_.transpose() * ay_;

        xMx_ = Ax_.transpose() * Ax_ - Cx_.transpose() * G_ldlt_.solve(Cx_);
        xMy_ = Ax_.transpose() * ay_ - Cx_.transpose() * G_ldlt_.solve(cy_);
    }

    const std::string& unit_id() const { return unit_id_; }
    const InstrumentSet& instruments() const { return Z_; }
    long t_eff() const { return t_eff_; }
    int k() const { return k_; }

    const MatrixXd& xMx() const { return xMx_; }  // X'M X
    const VectorXd& xMy() const { return xMy_; }  // X'M y

    // X'M r for r on the effective sample (r need not be demeaned; M kills
    // the ones direction).
    VectorXd xM(const VectorXd& r) const {
        const VectorXd q = Q1_.transpose() * r;
        return Ax_.transpose() * q - Cx_.transpose() * G_ldlt_.solve(B_.transpose() * q);
    }

    // M r as an explicit vector
    VectorXd Mv(const VectorXd& r) const {
        const VectorXd q = Q1_.transpose() * r;
        return Q1_ * (q - B_ * G_ldlt_.solve(B_.transpose() * q));
    }

    // IV regression of r on dZ through P: (dZ'P dZ)^-1 dZ'P r
    VectorXd iv_on_dz(const VectorXd& r) const {
        return G_ldlt_.solve(B_.transpose() * (Q1_.transpose() * r));
    }

  private:
    std::string unit_id_;
    InstrumentSet Z_;
    long t_eff_ = 0;
    int k_ = 0;
    MatrixXd Q1_;  // T_eff x (2k+1), orthonormal columns spanning H_tilde
    MatrixXd B_;
    Eigen::LDLT<MatrixXd> G_ldlt_;
    MatrixXd Ax_, Cx_;
    VectorXd ay_, cy_;
    MatrixXd xMx_;
    VectorXd xMy_;
};

}  // namespace pbpanel
