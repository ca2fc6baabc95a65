#pragma once

#include "vocalnote/contour.h"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vocalnote {

inline constexpr double kMinBpm = 30.0;
inline constexpr double kMaxBpm = 300.0;

/// Positive rational fraction of a beat, e.g. {1, 16}.
struct BeatFraction {
    int numerator = 1;
    int denominator = 1;

    double value() const noexcept { return static_cast<double>(numerator) / denominator; }
    bool operator==(const BeatFraction&) const = default;
};

/// Parses "1/16" or "3"; throws InvalidArgument unless both parts are positive.
BeatFraction parse_beat_fraction(std::string_view text);
std::string to_string(const BeatFraction& fraction);

/// A single global tempo tied to the frame hop of the contour it scales.
class BeatGrid {
public:
    BeatGrid(double bpm, double hop);

    double bpm() const noexcept { return bpm_; }
    double hop() const noexcept { return hop_; }
    double beat_seconds() const noexcept { return 60.0 / bpm_; }
    double seconds_for(const BeatFraction& fraction) const noexcept {
        return beat_seconds() * fraction.value();
    }

private:
    double bpm_;
    double hop_;
};

/// Median window length, in frames, spanning `fraction` of a beat: the odd
/// integer nearest to beat_seconds * fraction / hop (ties go up), at least 1.
int frames_for_beat_fraction(const BeatGrid& grid, const BeatFraction& fraction);

struct TempoEstimatorConfig {
    double prior_center_bpm = 120.0;
    double prior_sigma_octaves = 1.0;
    double min_bpm = kMinBpm;
    double max_bpm = kMaxBpm;
    double min_duration_seconds = 4.0;
};

/// Global tempo from an onset-strength envelope: the autocorrelation of the
/// mean-removed envelope is weighted by a log-normal prior over BPM and the
/// best lag in the 30-300 BPM range wins. The returned grid carries `hop`.
BeatGrid estimate_tempo(std::span<const double> envelope, double hop,
                        const TempoEstimatorConfig& config = {});

/// Fallback envelope when no audio-derived onset strength exists: semitone
/// jumps between voiced frames plus 1.0 at every unvoiced-to-voiced onset.
std::vector<double> envelope_from_contour(const PitchContour& contour,
                                          double confidence_floor = 0.5);

} // namespace vocalnote
