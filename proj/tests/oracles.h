#pragma once

// Independent reference computations used to freeze expected values. None of
// these call into the library's implementation of the quantity they check.

#include "vocalnote/quantizer.h"

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

namespace oracle {

using BigFloat = boost::multiprecision::cpp_dec_float_50;

/// round-half-up(69 + 12 log2(hz / 440)) evaluated with 50 decimal digits.
inline int midi_for_hz(const BigFloat& f) {
    const BigFloat value = BigFloat(69) + BigFloat(12) * (log(f) - log(BigFloat(440))) / log(BigFloat(2));
    return static_cast<int>(floor(value + BigFloat("0.5")));
}

/// Nearest odd integer >= 1 to `frames` by scanning candidates; ties go up.
inline int nearest_odd_by_scan(double frames) {
    int best = 1;
    double best_dist = std::abs(frames - 1.0);
    for (int k = 3; k < 1 + 2 * static_cast<int>(frames + 4.0); k += 2) {
        const double d = std::abs(frames - k);
        if (d <= best_dist) {
            best = k;
            best_dist = d;
        }
    }
    return best;
}

enum class Level { COn, COnP, COnPOff };

/// Pair validity written out directly from the metric definition.
inline bool valid(const vocalnote::NoteEvent& r, const vocalnote::NoteEvent& e, Level level) {
    const double slack = 1e-10;
    if (std::abs(r.onset - e.onset) > 0.05 + slack) return false;
    if (level == Level::COn) return true;
    if (r.pitch != e.pitch) return false;
    if (level == Level::COnP) return true;
    const double tol = std::max(0.05, 0.2 * (r.offset - r.onset));
    return std::abs(r.offset - e.offset) <= tol + slack;
}

/// Largest one-to-one matching, by exhaustive search over every assignment
/// of each reference note to an unused estimate (or to nothing).
inline std::size_t max_matching_exhaustive(const std::vector<vocalnote::NoteEvent>& ref,
                                           const std::vector<vocalnote::NoteEvent>& est, Level level) {
    std::map<std::pair<std::size_t, std::uint32_t>, std::size_t> memo;
    auto best = [&](auto&& self, std::size_t r, std::uint32_t used) -> std::size_t {
        if (r == ref.size()) return 0;
        const auto key = std::make_pair(r, used);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        std::size_t result = self(self, r + 1, used);
        for (std::size_t e = 0; e < est.size(); ++e) {
            if ((used >> e) & 1u) continue;
            if (!valid(ref[r], est[e], level)) continue;
            result = std::max(result, 1 + self(self, r + 1, used | (1u << e)));
        }
        memo[key] = result;
        return result;
    };
    return best(best, 0, 0);
}

inline double f1_from_counts(std::size_t hits, std::size_t n_ref, std::size_t n_est) {
    const double p = n_est ? static_cast<double>(hits) / n_est : 0.0;
    const double r = n_ref ? static_cast<double>(hits) / n_ref : 0.0;
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

/// Lag of the largest raw autocorrelation of the mean-removed signal in [lo, hi].
inline std::size_t autocorrelation_peak(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
    double mean = 0;
    for (double v : x) mean += v;
    mean /= x.size();
    std::size_t best = lo;
    double best_val = -1e300;
    for (std::size_t lag = lo; lag <= hi; ++lag) {
        double s = 0;
        for (std::size_t t = 0; t + lag < x.size(); ++t) s += (x[t] - mean) * (x[t + lag] - mean);
        if (s > best_val) {
            best_val = s;
            best = lag;
        }
    }
    return best;
}

inline std::vector<double> impulse_train(double period_s, double hop, double length_s) {
    const auto n = static_cast<std::size_t>(std::llround(length_s / hop));
    const auto period = static_cast<std::size_t>(std::llround(period_s / hop));
    std::vector<double> x(n, 0.0);
    for (std::size_t t = 0; t < n; t += period) x[t] = 1.0;
    return x;
}

/// Width-w median filter evaluated by sorting each clamped window.
inline std::vector<int> median_by_sorting(const std::vector<int>& x, int w) {
    const int n = static_cast<int>(x.size());
    std::vector<int> out(x.size());
    for (int i = 0; i < n; ++i) {
        std::vector<int> win;
        for (int k = -w / 2; k <= w / 2; ++k) win.push_back(x[std::clamp(i + k, 0, n - 1)]);
        std::sort(win.begin(), win.end());
        out[i] = win[w / 2];
    }
    return out;
}

} // namespace oracle
