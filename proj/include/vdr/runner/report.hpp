#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vdr/types.hpp"

namespace vdr::runner {

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw InvalidArgument("quantile of an empty sample");
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    // Exact order statistics stay exact, which keeps infinite samples usable.
    if (frac == 0.0 || xs[hi] == xs[lo]) return xs[lo];
    return xs[lo] + frac * (xs[hi] - xs[lo]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

/// Per-episode returns read from a results.csv whose header names an
/// "episode" and a "return" column.
inline std::vector<double> read_returns_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw InvalidArgument("empty results file");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    const auto col = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw InvalidArgument("results file lacks a '" + name + "' column");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ep_col = col("episode");
    const std::size_t ret_col = col("return");
    std::vector<double> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() <= std::max(ep_col, ret_col)) throw InvalidArgument("short row in results file");
        const auto ep = static_cast<std::size_t>(std::stoul(cells[ep_col]));
        if (ep != out.size()) throw InvalidArgument("episodes in results file are not consecutive");
        out.push_back(std::stod(cells[ret_col]));
    }
    return out;
}

inline std::vector<double> read_returns_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    return read_returns_csv(in);
}

struct CurvePoint {
    int episode = 0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    int n_runs = 0;
};

/// Per-episode median and quartiles across runs; episodes past the end of a
/// shorter run use only the runs that reached them.
inline std::vector<CurvePoint> aggregate(const std::vector<std::vector<double>>& runs) {
    std::size_t len = 0;
    for (const auto& r : runs) len = std::max(len, r.size());
    std::vector<CurvePoint> out;
    for (std::size_t e = 0; e < len; ++e) {
        std::vector<double> xs;
        for (const auto& r : runs)
            if (e < r.size()) xs.push_back(r[e]);
        out.push_back({static_cast<int>(e), quantile(xs, 0.5), quantile(xs, 0.25), quantile(xs, 0.75),
                       static_cast<int>(xs.size())});
    }
    return out;
}

inline void write_report_csv(std::ostream& os, const std::vector<CurvePoint>& curve) {
    os << "episode,median_return,q25,q75\n";
    os << std::setprecision(17);
    for (const auto& p : curve) os << p.episode << ',' << p.median << ',' << p.q25 << ',' << p.q75 << '\n';
}

}  // namespace vdr::runner
