#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "pbpanel/estimator.hpp"
#include "pbpanel/montecarlo.hpp"

namespace pbpanel {

// full precision, locale-independent (C locale "%.17g")
inline std::string csv_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// 4 significant figures for the text tables
inline std::string table_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct EstimateRow {
    std::string estimator;
    std::string correction;
    std::string coef;
    double estimate = 0.0;
    double se = 0.0;
    double crit = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

inline void write_estimates_csv(const std::vector<EstimateRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "estimator,correction,coef,estimate,se,crit,ci_lo,ci_hi\n";
    for (const auto& r : rows)
        out << r.estimator << ',' << r.correction << ',' << r.coef << ',' << csv_num(r.estimate)
            << ',' << csv_num(r.se) << ',' << csv_num(r.crit) << ',' << csv_num(r.ci_lo) << ','
            << csv_num(r.ci_hi) << '\n';
}

inline std::string format_estimates_table(const std::vector<EstimateRow>& rows, double level) {
    std::ostringstream os;
    const int conf = static_cast<int>(100.0 * (1.0 - level) + 0.5);
    os << std::left << std::setw(10) << "estimator" << std::setw(12) << "correction"
       << std::setw(10) << "coef" << std::setw(12) << "estimate" << std::setw(24)
       << (std::to_string(conf) + "% conf. int.") << '\n';
    os << std::string(64, '-') << '\n';
    for (const auto& r : rows) {
        os << std::left << std::setw(10) << r.estimator << std::setw(12) << r.correction
           << std::setw(10) << r.coef << std::setw(12) << table_num(r.estimate) << "["
           << table_num(r.ci_lo) << ", " << table_num(r.ci_hi) << "]" << '\n';
    }
    return os.str();
}

inline void write_mc_csv(const McSummary& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "estimator,correction,n,T,bias,rmse,size,power,reps,failures\n";
    for (const auto& c : s.cells)
        out << estimator_name(c.estimator) << ',' << correction_name(c.correction) << ',' << c.n
            << ',' << c.T << ',' << csv_num(c.bias) << ',' << csv_num(c.rmse) << ','
            << csv_num(c.size) << ',' << csv_num(c.power) << ',' << c.reps_used << ','
            << c.failures << '\n';
}

// Four-block layout mirroring the simulation tables: bias and RMSE scaled by
// 100, size and power as percentages.
inline std::string format_mc_table(const McSummary& s) {
    std::ostringstream os;
    os << "n=" << s.config.n << " T=" << s.config.T << "  reps=" << s.R_mc
       << "  bootstrap reps=" << s.R_b << "  level=" << table_num(s.level)
       << "  H0: beta=" << table_num(s.null_beta) << "  H1: beta=" << table_num(s.alt_beta)
       << (s.config.cross_sectional_dependence ? "  (cross-sectionally dependent errors)"
                                               : "  (independent errors)")
       << "\n\n";
    os << std::left << std::setw(10) << "estimator" << std::setw(12) << "correction"
       << std::right << std::setw(12) << "bias x100" << std::setw(12) << "rmse x100"
       << std::setw(12) << "size (%)" << std::setw(12) << "power (%)" << std::setw(8) << "reps"
       << std::setw(10) << "failures" << '\n';
    os << std::string(88, '-') << '\n';
    for (const auto& c : s.cells) {
        os << std::left << std::setw(10) << estimator_name(c.estimator) << std::setw(12)
           << correction_name(c.correction) << std::right << std::setw(12)
           << table_num(100.0 * c.bias) << std::setw(12) << table_num(100.0 * c.rmse)
           << std::setw(12) << table_num(100.0 * c.size) << std::setw(12)
           << table_num(100.0 * c.power) << std::setw(8) << c.reps_used << std::setw(10)
           << c.failures << '\n';
    }
    return os.str();
}

// FNV-1a over the canonical key=value configuration text.
inline std::uint64_t config_hash(const std::string& canonical) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace pbpanel
