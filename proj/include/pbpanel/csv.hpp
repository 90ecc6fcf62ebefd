#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbpanel/panel.hpp"

namespace pbpanel {

class CsvError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(const std::string& s) {
    auto b = s.begin(), e = s.end();
    while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
    while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
    return std::string(b, e);
}

inline bool is_missing(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == ".";
}

inline double parse_double(const std::string& s, std::size_t line_no, const std::string& col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw CsvError("line " + std::to_string(line_no) + ": non-numeric value '" + s +
                       "' in column " + col);
    }
}

inline long parse_long(const std::string& s, std::size_t line_no, const std::string& col) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw CsvError("line " + std::to_string(line_no) + ": non-integer value '" + s +
                       "' in column " + col);
    }
}

}  // namespace detail

// Loads a long-format panel with header unit,time,y,x1[,x2,...]. Rows are
// grouped by unit and sorted by time; leading/trailing rows with missing
// values are trimmed, interior gaps or missing values are errors.
inline PanelDataset load_panel_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw CsvError("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = detail::split_csv_line(line);
    for (auto& h : header) h = detail::trim(h);
    if (header.size() < 4 || header[0] != "unit" || header[1] != "time" || header[2] != "y")
        throw CsvError("header must be unit,time,y,x1[,x2,...], got '" + line + "'");
    const int k = static_cast<int>(header.size()) - 3;
    std::vector<std::string> reg_names(header.begin() + 3, header.end());

    struct Row {
        long time;
        std::vector<double> vals;  // y, x1..xk; NaN marks missing
        bool any_missing;
        std::size_t line_no;
    };
    std::map<std::string, std::vector<Row>> by_unit;
    std::vector<std::string> unit_order;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw CsvError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
        for (auto& f : fields) f = detail::trim(f);

        Row row;
        row.line_no = line_no;
        row.time = detail::parse_long(fields[1], line_no, "time");
        row.any_missing = false;
        row.vals.resize(1 + k);
        for (int j = 0; j < 1 + k; ++j) {
            const std::string& cell = fields[2 + j];
            if (detail::is_missing(cell)) {
                row.vals[j] = std::numeric_limits<double>::quiet_NaN();
                row.any_missing = true;
            } else {
                row.vals[j] = detail::parse_double(cell, line_no, header[2 + j]);
            }
        }
        const std::string& unit = fields[0];
        if (by_unit.find(unit) == by_unit.end()) unit_order.push_back(unit);
        by_unit[unit].push_back(std::move(row));
    }

    std::vector<UnitSeries> units;
    units.reserve(unit_order.size());
    for (const auto& uid : unit_order) {
        auto& rows = by_unit[uid];
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.time < b.time; });
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].time == rows[i - 1].time)
                throw CsvError("duplicate (unit,time) = ('" + uid + "'," +
                               std::to_string(rows[i].time) + ") at lines " +
                               std::to_string(rows[i - 1].line_no) + " and " +
                               std::to_string(rows[i].line_no));

        // trim leading/trailing missing rows; interior missing is an error
        std::size_t lo = 0, hi = rows.size();
        while (lo < hi && rows[lo].any_missing) ++lo;
        while (hi > lo && rows[hi - 1].any_missing) --hi;
        for (std::size_t i = lo; i < hi; ++i)
            if (rows[i].any_missing)
                throw CsvError("unit '" + uid + "': missing value inside the retained window at line " +
                               std::to_string(rows[i].line_no));
        if (lo >= hi) throw CsvError("unit '" + uid + "': no usable rows");

        for (std::size_t i = lo + 1; i < hi; ++i)
            if (rows[i].time != rows[i - 1].time + 1)
                throw CsvError("unit '" + uid + "': time gap between " +
                               std::to_string(rows[i - 1].time) + " and " +
                               std::to_string(rows[i].time));

        UnitSeries u;
        u.unit_id = uid;
        u.t0 = rows[lo].time;
        const long T = static_cast<long>(hi - lo);
        u.y.resize(T);
        u.X.resize(T, k);
        for (long t = 0; t < T; ++t) {
            u.y(t) = rows[lo + t].vals[0];
            for (int j = 0; j < k; ++j) u.X(t, j) = rows[lo + t].vals[1 + j];
        }
        units.push_back(std::move(u));
    }

    try {
        return make_panel(std::move(units), std::move(reg_names));
    } catch (const PanelError& e) {
        throw CsvError("'" + path + "': " + e.what());
    }
}

inline void write_panel_csv(const PanelDataset& panel, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw CsvError("cannot write '" + path + "'");
    out << "unit,time,y";
    for (const auto& name : panel.regressor_names) out << ',' << name;
    out << '\n';
    char buf[64];
    for (const auto& u : panel.units) {
        for (long t = 0; t < u.n_obs(); ++t) {
            out << u.unit_id << ',' << (u.t0 + t);
            std::snprintf(buf, sizeof buf, "%.15g", u.y(t));
            out << ',' << buf;
            for (int j = 0; j < panel.k; ++j) {
                std::snprintf(buf, sizeof buf, "%.15g", u.X(t, j));
                out << ',' << buf;
            }
            out << '\n';
        }
    }
}

}  // namespace pbpanel
