#pragma once

#include "vocalnote/quantizer.h"

#include <cstdint>
#include <string>
#include <string_view>

namespace vocalnote {

inline constexpr int kTicksPerQuarter = 480;
inline constexpr int kExportVelocity = 80;

/// round(seconds * bpm / 60 * 480)
std::int64_t seconds_to_ticks(double seconds, double bpm);

/// Format-0 Standard MIDI File: one tempo meta event, then note-on / note-off
/// pairs on channel 0. A note shorter than one tick is widened to one tick.
std::string export_midi(const NoteSequence& seq, double bpm);

struct ImportedMidi {
    NoteSequence notes;
    double bpm = 120.0; ///< first tempo event, 120 when absent
};

/// Reads format 0 or 1 files with a ticks-per-quarter division, honouring the
/// full tempo map. Throws SchemaViolation on anything it cannot interpret.
ImportedMidi import_midi(std::string_view bytes);

} // namespace vocalnote
