#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "vdr/types.hpp"

namespace vdr::augment {

enum class ScoreMode { Plain, Bootstrap };

inline const char* to_string(ScoreMode m) { return m == ScoreMode::Plain ? "plain" : "bootstrap"; }

inline ScoreMode score_mode_from(const std::string& s) {
    if (s == "plain") return ScoreMode::Plain;
    if (s == "bootstrap") return ScoreMode::Bootstrap;
    throw InvalidArgument("unknown score mode: " + s);
}

inline constexpr double kStdFloor = 1e-6;

/// KL divergence times value gain.
inline double score_plain(double kl, double v_new, double v_old) { return kl * (v_new - v_old); }

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// KL times the z-score of the bootstrap value gain.
inline double score_bootstrap(double kl, const std::vector<double>& v_new, double v_old) {
    if (v_new.size() < 2) throw InvalidArgument("bootstrap score needs at least two values");
    return kl * (mean(v_new) - v_old) / std::max(sample_std(v_new), kStdFloor);
}

}  // namespace vdr::augment
