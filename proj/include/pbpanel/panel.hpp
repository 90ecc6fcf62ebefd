#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pbpanel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class PanelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// One cross-section member: levels of the outcome and the k regressors on a
// contiguous window of integer periods starting at t0.
struct UnitSeries {
    std::string unit_id;
    VectorXd y;   // T_i levels
    MatrixXd X;   // T_i x k levels
    long t0 = 0;  // first period

    long n_obs() const { return y.size(); }
    // one observation is lost to lags/differences
    long n_effective() const { return y.size() - 1; }
};

// Minimum effective (post-differencing) observations per unit.
inline long min_effective_obs(int k) {
    return std::max<long>(5, 2L * static_cast<long>(k) + 3);
}

struct PanelDataset {
    std::vector<UnitSeries> units;
    int k = 0;
    bool balanced = true;
    std::vector<std::string> regressor_names;

    int n_units() const { return static_cast<int>(units.size()); }

    double mean_effective_T() const {
        double s = 0.0;
        for (const auto& u : units) s += static_cast<double>(u.n_effective());
        return s / static_cast<double>(units.size());
    }
};

inline void validate_unit(const UnitSeries& u, int k) {
    if (u.X.cols() != k)
        throw PanelError("unit '" + u.unit_id + "': regressor count " +
                         std::to_string(u.X.cols()) + " does not match panel k=" +
                         std::to_string(k));
    if (u.y.size() != u.X.rows())
        throw PanelError("unit '" + u.unit_id + "': y length and X rows differ");
    if (u.n_effective() < min_effective_obs(k))
        throw PanelError("unit '" + u.unit_id + "': only " +
                         std::to_string(u.n_effective()) +
                         " effective observations, need at least " +
                         std::to_string(min_effective_obs(k)));
    if (!u.y.allFinite() || !u.X.allFinite())
        throw PanelError("unit '" + u.unit_id + "': non-finite value inside the retained window");
}

inline PanelDataset make_panel(std::vector<UnitSeries> units,
                               std::vector<std::string> regressor_names = {}) {
    if (units.empty()) throw PanelError("panel has no units");
    PanelDataset panel;
    panel.k = static_cast<int>(units.front().X.cols());
    for (const auto& u : units) validate_unit(u, panel.k);
    panel.balanced = std::all_of(units.begin(), units.end(), [&](const UnitSeries& u) {
        return u.t0 == units.front().t0 && u.n_obs() == units.front().n_obs();
    });
    if (regressor_names.empty()) {
        for (int j = 1; j <= panel.k; ++j) regressor_names.push_back("x" + std::to_string(j));
    }
    if (static_cast<int>(regressor_names.size()) != panel.k)
        throw PanelError("regressor name count does not match k");
    panel.regressor_names = std::move(regressor_names);
    panel.units = std::move(units);
    return panel;
}

// Time-axis split for the half-panel jackknife. The halves share the boundary
// level: it is the last observation of half a and the initial value of half b,
// so the halves' effective regression rows partition the full-sample rows.
inline std::pair<UnitSeries, UnitSeries> split_unit(const UnitSeries& u) {
    const long t_eff = u.n_effective();
    const long half_rows = t_eff / 2;  // effective rows in half a
    UnitSeries a{u.unit_id, u.y.head(half_rows + 1), u.X.topRows(half_rows + 1), u.t0};
    UnitSeries b{u.unit_id, u.y.tail(u.n_obs() - half_rows),
                 u.X.bottomRows(u.n_obs() - half_rows), u.t0 + half_rows};
    return {std::move(a), std::move(b)};
}

inline std::pair<PanelDataset, PanelDataset> split_panel(const PanelDataset& panel) {
    std::vector<UnitSeries> first, second;
    first.reserve(panel.units.size());
    second.reserve(panel.units.size());
    for (const auto& u : panel.units) {
        auto [a, b] = split_unit(u);
        const long need = min_effective_obs(panel.k);
        if (a.n_effective() < need)
            throw PanelError("first half-sample of unit '" + u.unit_id + "' has " +
                             std::to_string(a.n_effective()) +
                             " effective observations, need " + std::to_string(need));
        if (b.n_effective() < need)
            throw PanelError("second half-sample of unit '" + u.unit_id + "' has " +
                             std::to_string(b.n_effective()) +
                             " effective observations, need " + std::to_string(need));
        first.push_back(std::move(a));
        second.push_back(std::move(b));
    }
    return {make_panel(std::move(first), panel.regressor_names),
            make_panel(std::move(second), panel.regressor_names)};
}

}  // namespace pbpanel
