#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vocalnote {

inline constexpr double kMinVoicedHz = 20.0;
inline constexpr double kMaxVoicedHz = 5000.0;

/// One analysis frame of a pitch tracker. f0 == 0 encodes an unvoiced frame.
struct PitchFrame {
    double f0 = 0.0;
    double confidence = 0.0;

    bool voiced() const noexcept { return f0 > 0.0; }
    bool operator==(const PitchFrame&) const = default;
};

/// Throws RangeViolation if the frame breaks the f0 / confidence bounds.
void validate_frame(const PitchFrame& frame);

/// Uniformly sampled frame-level pitch track. Immutable once built; the
/// constructor enforces hop > 0, at least one frame, and per-frame bounds.
class PitchContour {
public:
    PitchContour(double hop, std::vector<PitchFrame> frames, std::string track_id = {});

    double hop() const noexcept { return hop_; }
    std::span<const PitchFrame> frames() const noexcept { return frames_; }
    std::size_t size() const noexcept { return frames_.size(); }
    const std::string& track_id() const noexcept { return track_id_; }
    double duration() const noexcept { return static_cast<double>(frames_.size()) * hop_; }

private:
    double hop_;
    std::vector<PitchFrame> frames_;
    std::string track_id_;
};

/// Hop used when a CSV holds a single row and no spacing can be inferred.
inline constexpr double kDefaultHop = 0.01;

/// Parses the `time_sec,f0_hz,confidence` interchange CSV.
///
/// The hop is the median row-to-row time delta; every delta must lie within
/// 1e-6 s of it. A first timestamp that is a positive whole number of hops is
/// materialized as leading unvoiced frames so note times stay absolute.
PitchContour parse_contour_csv(std::string_view text, std::string track_id = {},
                               double single_row_hop = kDefaultHop);

/// Canonical writer: `\n` line endings, 6 decimals, time = index * hop.
std::string write_contour_csv(const PitchContour& contour);

/// Onset-strength envelope sampled at a fixed hop.
struct Envelope {
    double hop = 0.0;
    std::vector<double> values;
};

/// Parses the `time_sec,strength` CSV; same spacing rules as the contour CSV.
Envelope parse_envelope_csv(std::string_view text, double single_row_hop = kDefaultHop);
std::string write_envelope_csv(const Envelope& envelope);

} // namespace vocalnote
