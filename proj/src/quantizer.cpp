#include "vocalnote/quantizer.h"

#include "vocalnote/error.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <utility>

namespace vocalnote {

namespace {

constexpr double kHopTolerance = 1e-9;
// Largest label span the counting median handles before falling back to sorting.
constexpr int kHistogramSpan = 4096;
constexpr int kOctaveTrigger = 11;
constexpr int kMaxOctaveShifts = 2;

void require_same_hop(const QuantizedContour& q, const BeatGrid& grid) {
    if (std::abs(q.hop - grid.hop()) > kHopTolerance) {
        throw Error(ErrorKind::HopMismatch,
                    fmt::format("contour hop {} differs from grid hop {}", q.hop, grid.hop()));
    }
}

struct Run {
    std::size_t begin;
    std::size_t end; // exclusive
    int label;
};

std::vector<Run> voiced_runs(const std::vector<int>& labels) {
    std::vector<Run> runs;
    std::size_t i = 0;
    while (i < labels.size()) {
        std::size_t j = i + 1;
        while (j < labels.size() && labels[j] == labels[i]) ++j;
        if (labels[i] != kUnvoiced) runs.push_back({i, j, labels[i]});
        i = j;
    }
    return runs;
}

} // namespace

void validate_notes(const NoteSequence& seq) {
    for (std::size_t i = 0; i < seq.notes.size(); ++i) {
        const auto& n = seq.notes[i];
        if (!std::isfinite(n.onset) || !std::isfinite(n.offset) || !(n.offset > n.onset)) {
            throw Error(ErrorKind::SchemaViolation,
                        fmt::format("note {}: offset {} must exceed onset {}", i, n.offset, n.onset));
        }
        if (n.pitch < kMidiMin || n.pitch > kMidiMax) {
            throw Error(ErrorKind::SchemaViolation,
                        fmt::format("note {}: pitch {} outside [{}, {}]", i, n.pitch, kMidiMin, kMidiMax));
        }
        if (i > 0 && seq.notes[i - 1].offset > n.onset) {
            throw Error(ErrorKind::SchemaViolation,
                        fmt::format("note {} overlaps or precedes note {}", i, i - 1));
        }
    }
}

void validate_config(const QuantizationConfig& config) {
    const auto positive = [](const BeatFraction& f) { return f.numerator > 0 && f.denominator > 0; };
    if (!std::all_of(config.filter_fractions.begin(), config.filter_fractions.end(), positive) ||
        !positive(config.min_fragment_fraction)) {
        throw Error(ErrorKind::InvalidArgument, "beat fractions must be positive");
    }
    if (!(config.confidence_floor >= 0.0 && config.confidence_floor <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "confidence floor must lie in [0, 1]");
    }
    if (!(config.octave_context_seconds > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "octave context must be positive");
    }
}

int nearest_midi(double f0) {
    return static_cast<int>(std::floor(69.0 + 12.0 * std::log2(f0 / 440.0) + 0.5));
}

QuantizedContour quantize_pitch(const PitchContour& contour, const QuantizationConfig& config) {
    QuantizedContour q{contour.hop(), {}};
    q.labels.reserve(contour.size());
    for (const auto& frame : contour.frames()) {
        if (!frame.voiced() || frame.confidence < config.confidence_floor) {
            q.labels.push_back(kUnvoiced);
        } else {
            q.labels.push_back(std::clamp(nearest_midi(frame.f0), kMidiMin, kMidiMax));
        }
    }
    return q;
}

std::vector<int> median_filter(std::span<const int> labels, int window) {
    if (window < 1 || window % 2 == 0) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("median window {} is not odd", window));
    }
    const auto n = static_cast<std::ptrdiff_t>(labels.size());
    std::vector<int> out(labels.size());
    if (n == 0 || window == 1) {
        std::copy(labels.begin(), labels.end(), out.begin());
        return out;
    }
    const std::ptrdiff_t half = window / 2;
    const auto at = [&](std::ptrdiff_t i) { return labels[std::clamp<std::ptrdiff_t>(i, 0, n - 1)]; };
    const auto [lo_it, hi_it] = std::minmax_element(labels.begin(), labels.end());
    const int lo = *lo_it;
    const long span = static_cast<long>(*hi_it) - lo + 1;

    if (span > kHistogramSpan) {
        std::vector<int> buf(static_cast<std::size_t>(window));
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            for (std::ptrdiff_t k = -half; k <= half; ++k) buf[k + half] = at(i + k);
            std::nth_element(buf.begin(), buf.begin() + half, buf.end());
            out[i] = buf[half];
        }
        return out;
    }

    std::vector<int> counts(static_cast<std::size_t>(span), 0);
    for (std::ptrdiff_t k = -half; k <= half; ++k) ++counts[at(k) - lo];
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (i > 0) {
            --counts[at(i - 1 - half) - lo];
            ++counts[at(i + half) - lo];
        }
        std::ptrdiff_t seen = 0;
        for (int v = 0; v < span; ++v) {
            seen += counts[v];
            if (seen > half) {
                out[i] = v + lo;
                break;
            }
        }
    }
    return out;
}

QuantizedContour rhythm_quantize(const QuantizedContour& q, const BeatGrid& grid,
                                 const QuantizationConfig& config) {
    require_same_hop(q, grid);
    QuantizedContour out = q;
    for (const auto& fraction : config.filter_fractions) {
        out.labels = median_filter(out.labels, frames_for_beat_fraction(grid, fraction));
    }
    return out;
}

QuantizedContour remove_fragments(const QuantizedContour& q, const BeatGrid& grid,
                                  const QuantizationConfig& config) {
    require_same_hop(q, grid);
    const double threshold = grid.seconds_for(config.min_fragment_fraction);
    QuantizedContour out = q;
    for (const auto& run : voiced_runs(q.labels)) {
        const double length = static_cast<double>(run.end - run.begin) * q.hop;
        if (length < threshold - kHopTolerance) {
            std::fill(out.labels.begin() + static_cast<std::ptrdiff_t>(run.begin),
                      out.labels.begin() + static_cast<std::ptrdiff_t>(run.end), kUnvoiced);
        }
    }
    return out;
}

QuantizedContour correct_octaves(const QuantizedContour& q, const QuantizationConfig& config) {
    const auto context = static_cast<std::size_t>(std::llround(config.octave_context_seconds / q.hop));
    QuantizedContour out = q;
    std::vector<int> neighbours;
    for (const auto& run : voiced_runs(q.labels)) {
        neighbours.clear();
        const std::size_t lo = run.begin > context ? run.begin - context : 0;
        const std::size_t hi = std::min(q.labels.size(), run.end + context);
        for (std::size_t i = lo; i < run.begin; ++i) {
            if (q.labels[i] != kUnvoiced) neighbours.push_back(q.labels[i]);
        }
        for (std::size_t i = run.end; i < hi; ++i) {
            if (q.labels[i] != kUnvoiced) neighbours.push_back(q.labels[i]);
        }
        if (neighbours.empty()) continue;

        std::sort(neighbours.begin(), neighbours.end());
        const std::size_t mid = neighbours.size() / 2;
        const double median = neighbours.size() % 2 == 1
                                  ? neighbours[mid]
                                  : 0.5 * (neighbours[mid - 1] + neighbours[mid]);

        int pitch = run.label;
        for (int shifts = 0; shifts < kMaxOctaveShifts; ++shifts) {
            const double gap = pitch - median;
            if (std::abs(gap) < kOctaveTrigger) break;
            const int candidate = gap > 0 ? pitch - 12 : pitch + 12;
            if (std::abs(candidate - median) >= std::abs(gap) || candidate < kMidiMin ||
                candidate > kMidiMax) {
                break;
            }
            pitch = candidate;
        }
        if (pitch != run.label) {
            std::fill(out.labels.begin() + static_cast<std::ptrdiff_t>(run.begin),
                      out.labels.begin() + static_cast<std::ptrdiff_t>(run.end), pitch);
        }
    }
    return out;
}

NoteSequence segment_notes(const QuantizedContour& q, std::string track_id) {
    NoteSequence seq{std::move(track_id), {}};
    for (const auto& run : voiced_runs(q.labels)) {
        seq.notes.push_back({static_cast<double>(run.begin) * q.hop,
                             static_cast<double>(run.end) * q.hop, run.label});
    }
    return seq;
}

QuantizedContour render_piano_roll(const NoteSequence& seq, double hop, std::size_t n_frames) {
    QuantizedContour q{hop, std::vector<int>(n_frames, kUnvoiced)};
    for (const auto& note : seq.notes) {
        const auto begin = static_cast<std::size_t>(std::max(0.0, std::round(note.onset / hop)));
        const auto end = static_cast<std::size_t>(std::max(0.0, std::round(note.offset / hop)));
        for (std::size_t i = begin; i < std::min(end, n_frames); ++i) q.labels[i] = note.pitch;
    }
    return q;
}

NoteSequence postprocess(const QuantizedContour& q, const BeatGrid& grid,
                         const QuantizationConfig& config, std::string track_id) {
    validate_config(config);
    const auto smoothed = rhythm_quantize(q, grid, config);
    const auto pruned = remove_fragments(smoothed, grid, config);
    return segment_notes(correct_octaves(pruned, config), std::move(track_id));
}

NoteSequence convert(const PitchContour& contour, const BeatGrid& grid,
                     const QuantizationConfig& config) {
    validate_config(config);
    return postprocess(quantize_pitch(contour, config), grid, config, contour.track_id());
}

} // namespace vocalnote
