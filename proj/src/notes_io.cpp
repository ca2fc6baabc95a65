#include "vocalnote/notes_io.h"

#include "vocalnote/error.h"

#include <fmt/format.h>
#include <json.hpp>

namespace vocalnote {

using nlohmann::json;

std::string write_notes_json(const NoteSequence& seq) {
    std::string out = fmt::format("{{\"track_id\": {}, \"notes\": [", json(seq.track_id).dump());
    for (std::size_t i = 0; i < seq.notes.size(); ++i) {
        const auto& n = seq.notes[i];
        out += fmt::format("{}{{\"onset_sec\": {:.6f}, \"offset_sec\": {:.6f}, \"midi_pitch\": {}}}",
                           i == 0 ? "" : ", ", n.onset, n.offset, n.pitch);
    }
    out += "]}\n";
    return out;
}

NoteSequence parse_notes_json(std::string_view text) {
    NoteSequence seq;
    try {
        const auto doc = json::parse(text);
        seq.track_id = doc.at("track_id").get<std::string>();
        for (const auto& item : doc.at("notes")) {
            const auto& pitch = item.at("midi_pitch");
            if (!pitch.is_number_integer()) {
                throw Error(ErrorKind::SchemaViolation, "midi_pitch must be an integer");
            }
            seq.notes.push_back({item.at("onset_sec").get<double>(),
                                 item.at("offset_sec").get<double>(), pitch.get<int>()});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaViolation, fmt::format("notes JSON: {}", e.what()));
    }
    validate_notes(seq);
    return seq;
}

} // namespace vocalnote
