#pragma once

#include "vocalnote/quantizer.h"

#include <string>
#include <string_view>

namespace vocalnote {

/// `{"track_id": ..., "notes": [{"onset_sec": ..., "offset_sec": ..., "midi_pitch": ...}]}`
/// on one line, floats with 6 decimals, trailing newline.
std::string write_notes_json(const NoteSequence& seq);

/// Throws SchemaViolation on malformed JSON, missing keys or invalid notes.
NoteSequence parse_notes_json(std::string_view text);

} // namespace vocalnote
