#pragma once

#include "vocalnote/contour.h"
#include "vocalnote/tempo.h"

#include <span>
#include <string>
#include <vector>

namespace vocalnote {

inline constexpr int kMidiMin = 36;
inline constexpr int kMidiMax = 95;
/// Label of an unvoiced frame. Sits below kMidiMin so silence takes part in
/// median filtering as the lowest class.
inline constexpr int kUnvoiced = 0;

/// Hard per-frame class labels: kUnvoiced or a MIDI note in [kMidiMin, kMidiMax].
struct QuantizedContour {
    double hop = 0.0;
    std::vector<int> labels;

    bool operator==(const QuantizedContour&) const = default;
};

struct NoteEvent {
    double onset = 0.0;
    double offset = 0.0;
    int pitch = 0;

    bool operator==(const NoteEvent&) const = default;
};

/// Monophonic note list sorted by onset.
struct NoteSequence {
    std::string track_id;
    std::vector<NoteEvent> notes;

    bool operator==(const NoteSequence&) const = default;
};

/// Throws SchemaViolation on offset <= onset, out-of-range pitch, unsorted
/// or overlapping notes.
void validate_notes(const NoteSequence& seq);

struct QuantizationConfig {
    std::vector<BeatFraction> filter_fractions{{1, 32}, {1, 16}, {1, 12}};
    BeatFraction min_fragment_fraction{1, 16};
    double confidence_floor = 0.5;
    double octave_context_seconds = 2.0;
};

void validate_config(const QuantizationConfig& config);

/// 69 + 12 log2(f0 / 440) rounded half-up, without clamping.
int nearest_midi(double f0);

QuantizedContour quantize_pitch(const PitchContour& contour, const QuantizationConfig& config = {});

/// Sliding median over integer labels with replicate padding at both ends.
/// `window` must be odd and positive.
std::vector<int> median_filter(std::span<const int> labels, int window);

QuantizedContour rhythm_quantize(const QuantizedContour& q, const BeatGrid& grid,
                                 const QuantizationConfig& config = {});

QuantizedContour remove_fragments(const QuantizedContour& q, const BeatGrid& grid,
                                  const QuantizationConfig& config = {});

/// Moves each voiced run by whole octaves toward the median of the voiced
/// labels around it (within octave_context_seconds on either side, the run
/// itself excluded). Shifts only while the gap is at least 11 semitones and
/// shrinks, at most twice, and never leaves the MIDI range.
QuantizedContour correct_octaves(const QuantizedContour& q, const QuantizationConfig& config = {});

NoteSequence segment_notes(const QuantizedContour& q, std::string track_id = {});

/// Inverse of segment_notes for frame-aligned notes: renders `n_frames` labels.
QuantizedContour render_piano_roll(const NoteSequence& seq, double hop, std::size_t n_frames);

/// Rhythm quantization, fragment removal, octave correction and
/// segmentation applied to an already pitch-quantized contour.
NoteSequence postprocess(const QuantizedContour& q, const BeatGrid& grid,
                         const QuantizationConfig& config = {}, std::string track_id = {});

/// Full frame-to-note conversion.
NoteSequence convert(const PitchContour& contour, const BeatGrid& grid,
                     const QuantizationConfig& config = {});

} // namespace vocalnote
