#include "vocalnote/tempo.h"

#include "vocalnote/error.h"
#include "vocalnote/quantizer.h"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

namespace vocalnote {

namespace {

int parse_positive_int(std::string_view text, std::string_view whole) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || value <= 0) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("bad beat fraction '{}'", whole));
    }
    return value;
}

} // namespace

BeatFraction parse_beat_fraction(std::string_view text) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        return {parse_positive_int(text, text), 1};
    }
    return {parse_positive_int(text.substr(0, slash), text),
            parse_positive_int(text.substr(slash + 1), text)};
}

std::string to_string(const BeatFraction& fraction) {
    return fmt::format("{}/{}", fraction.numerator, fraction.denominator);
}

BeatGrid::BeatGrid(double bpm, double hop) : bpm_(bpm), hop_(hop) {
    if (!(bpm >= kMinBpm && bpm <= kMaxBpm)) {
        throw Error(ErrorKind::RangeViolation,
                    fmt::format("bpm {} outside [{}, {}]", bpm, kMinBpm, kMaxBpm));
    }
    if (!(hop > 0.0) || !std::isfinite(hop)) {
        throw Error(ErrorKind::RangeViolation, fmt::format("hop must be positive, got {}", hop));
    }
}

int frames_for_beat_fraction(const BeatGrid& grid, const BeatFraction& fraction) {
    const double frames = grid.seconds_for(fraction) / grid.hop();
    // Odd k = 2j + 1 closest to `frames`: j is (frames - 1) / 2 rounded half-up.
    const double j = std::floor((frames - 1.0) / 2.0 + 0.5);
    return std::max(1, static_cast<int>(2.0 * j + 1.0));
}

BeatGrid estimate_tempo(std::span<const double> envelope, double hop,
                        const TempoEstimatorConfig& config) {
    if (!(hop > 0.0)) {
        throw Error(ErrorKind::RangeViolation, fmt::format("hop must be positive, got {}", hop));
    }
    const std::size_t n = envelope.size();
    if (static_cast<double>(n) * hop < config.min_duration_seconds - 1e-9) {
        throw Error(ErrorKind::EnvelopeTooShort,
                    fmt::format("{} frames at hop {} s cover less than {} s", n, hop,
                                config.min_duration_seconds));
    }
    for (double v : envelope) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw Error(ErrorKind::RangeViolation, fmt::format("envelope value {} is not >= 0", v));
        }
    }
    const double mean = std::accumulate(envelope.begin(), envelope.end(), 0.0) / static_cast<double>(n);
    std::vector<double> centered(n);
    std::transform(envelope.begin(), envelope.end(), centered.begin(),
                   [mean](double v) { return v - mean; });
    if (std::all_of(centered.begin(), centered.end(), [](double v) { return v == 0.0; })) {
        throw Error(ErrorKind::DegenerateEnvelope, "envelope has no variation");
    }

    const auto min_lag = static_cast<std::size_t>(std::ceil(60.0 / (config.max_bpm * hop) - 1e-9));
    auto max_lag = static_cast<std::size_t>(std::floor(60.0 / (config.min_bpm * hop) + 1e-9));
    max_lag = std::min(max_lag, n - 1);
    if (min_lag < 1 || min_lag > max_lag) {
        throw Error(ErrorKind::EnvelopeTooShort, "no admissible lag for the tempo range");
    }

    std::size_t best_lag = min_lag;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
        double ac = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t) {
            ac += centered[t] * centered[t + lag];
        }
        const double bpm = 60.0 / (static_cast<double>(lag) * hop);
        const double z = std::log2(bpm / config.prior_center_bpm) / config.prior_sigma_octaves;
        const double score = ac * std::exp(-0.5 * z * z);
        if (score > best_score) {
            best_score = score;
            best_lag = lag;
        }
    }
    const double bpm = std::clamp(60.0 / (static_cast<double>(best_lag) * hop), kMinBpm, kMaxBpm);
    return BeatGrid(bpm, hop);
}

std::vector<double> envelope_from_contour(const PitchContour& contour, double confidence_floor) {
    QuantizationConfig config;
    config.confidence_floor = confidence_floor;
    const auto q = quantize_pitch(contour, config);
    std::vector<double> env(q.labels.size(), 0.0);
    for (std::size_t t = 1; t < q.labels.size(); ++t) {
        const int prev = q.labels[t - 1];
        const int cur = q.labels[t];
        if (cur == kUnvoiced) continue;
        env[t] = prev == kUnvoiced ? 1.0 : std::abs(static_cast<double>(cur - prev));
    }
    return env;
}

} // namespace vocalnote
