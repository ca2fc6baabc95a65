#pragma once

// Temporary corpora and stub-model command templates shared by the
// self-training tests and the acceptance binary.

#include "vocalnote/contour.h"
#include "vocalnote/fsutil.h"
#include "vocalnote/notes_io.h"
#include "vocalnote/process.h"
#include "vocalnote/selftrain.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace fixture {

using namespace vocalnote;

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("vocalnote-test-" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline double hz_of(int midi) {
    return 440.0 * std::pow(2.0, (midi - 69) / 12.0);
}

/// Clean melody plus single-frame octave blips every 13 voiced frames. The
/// gold notes are the clean melody.
struct BlipTrack {
    PitchContour contour;
    NoteSequence gold;
};

inline BlipTrack blip_track(const std::string& id, const std::vector<int>& pitches) {
    const double hop = 0.01;
    const int note_frames = 100;
    const int gap_frames = 5;
    std::vector<PitchFrame> frames;
    NoteSequence gold{id, {}};
    for (int pitch : pitches) {
        const auto onset = static_cast<double>(frames.size()) * hop;
        for (int i = 0; i < note_frames; ++i) {
            const bool blip = i % 13 == 6;
            frames.push_back({hz_of(blip ? pitch + 12 : pitch), 0.9});
        }
        gold.notes.push_back({onset, onset + note_frames * hop, pitch});
        frames.insert(frames.end(), gap_frames, PitchFrame{0.0, 0.1});
    }
    return {PitchContour(hop, std::move(frames), id), std::move(gold)};
}

/// Writes blip tracks as contour + gold files. `audio_path` points at the
/// contour file, which is what the copying stub model treats as audio.
inline DatasetManifest blip_corpus(const fs::path& dir, int n_tracks, bool precomputed_contours) {
    const std::vector<std::vector<int>> melodies{{60, 64, 67, 62}, {57, 59, 60, 55}, {65, 69, 72, 70}};
    DatasetManifest data;
    for (int t = 0; t < n_tracks; ++t) {
        const auto id = "track" + std::to_string(t);
        const auto track = blip_track(id, melodies[static_cast<std::size_t>(t) % melodies.size()]);
        const auto contour = dir / (id + ".contour.csv");
        const auto gold = dir / (id + ".gold.json");
        write_file_atomic(contour, write_contour_csv(track.contour));
        write_file_atomic(gold, write_notes_json(track.gold));
        DatasetEntry e;
        e.track_id = id;
        e.audio_path = contour;
        if (precomputed_contours) e.contour_path = contour;
        e.gold_notes_path = gold;
        e.bpm = 120.0;
        data.entries.push_back(e);
    }
    return data;
}

inline RunContext context(const fs::path& run_dir) {
    RunContext ctx;
    ctx.run_dir = run_dir;
    return ctx;
}

/// Command templates calling `stub` and appending each invocation to `log`.
struct StubCommands {
    ExternalModelSpec pitch;
    ExternalModelSpec student;
    AugmenterSpec augmenter;
};

inline StubCommands stub_commands(const std::string& stub, const fs::path& log) {
    const auto s = shell_quote(stub);
    const auto l = " --log " + shell_quote(log.string());
    StubCommands c;
    c.pitch.predict_command = s + " predict {input_list} {output_dir} {model}" + l;
    c.pitch.model_artifact = "identity";
    c.student.predict_command = c.pitch.predict_command;
    c.student.train_command = s + " train {label_manifest} {output_model} {seed}" + l;
    c.augmenter.command = s + " augment {input_audio} {output_audio} {seed}" + l;
    c.augmenter.enabled = true;
    return c;
}

inline std::size_t count_lines(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec)) return 0;
    const auto text = read_file(path);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

/// Relative path -> content for every regular file under `dir`, skipping timing.json.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().filename() == "timing.json") continue;
        files[fs::relative(entry.path(), dir).string()] = read_file(entry.path());
    }
    return files;
}

} // namespace fixture
