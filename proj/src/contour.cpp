#include "vocalnote/contour.h"

#include "vocalnote/error.h"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <utility>

namespace vocalnote {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::NonUniformHop: return "NonUniformHop";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::RangeViolation: return "RangeViolation";
    case ErrorKind::EnvelopeTooShort: return "EnvelopeTooShort";
    case ErrorKind::DegenerateEnvelope: return "DegenerateEnvelope";
    case ErrorKind::HopMismatch: return "HopMismatch";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::CommandFailed: return "CommandFailed";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::StaleManifest: return "StaleManifest";
    case ErrorKind::AugmenterRequired: return "AugmenterRequired";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

void validate_frame(const PitchFrame& frame) {
    const bool f0_ok = frame.f0 == 0.0 || (frame.f0 >= kMinVoicedHz && frame.f0 <= kMaxVoicedHz);
    if (!f0_ok) {
        throw Error(ErrorKind::RangeViolation, fmt::format("f0 {} Hz outside [{}, {}]", frame.f0,
                                                           kMinVoicedHz, kMaxVoicedHz));
    }
    if (!(frame.confidence >= 0.0 && frame.confidence <= 1.0)) {
        throw Error(ErrorKind::RangeViolation,
                    fmt::format("confidence {} outside [0, 1]", frame.confidence));
    }
}

PitchContour::PitchContour(double hop, std::vector<PitchFrame> frames, std::string track_id)
    : hop_(hop), frames_(std::move(frames)), track_id_(std::move(track_id)) {
    if (!(hop_ > 0.0) || !std::isfinite(hop_)) {
        throw Error(ErrorKind::RangeViolation, fmt::format("hop must be positive, got {}", hop_));
    }
    if (frames_.empty()) {
        throw Error(ErrorKind::EmptyInput, "contour has no frames");
    }
    for (const auto& frame : frames_) {
        validate_frame(frame);
    }
}

namespace {

constexpr double kSpacingTolerance = 1e-6;
// Absorbs binary representation error of decimal timestamps.
constexpr double kFloatSlack = 1e-9;

struct Table {
    std::vector<double> times;
    std::vector<std::vector<double>> columns;
    std::vector<std::size_t> line_numbers;
};

std::string_view trim_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    return line;
}

double parse_number(std::string_view field, std::size_t line_no) {
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    double value = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw Error(ErrorKind::MalformedRow,
                    fmt::format("line {}: '{}' is not a finite number", line_no, field));
    }
    return value;
}

Table read_table(std::string_view text, std::string_view header, std::size_t n_values) {
    Table table;
    table.columns.resize(n_values);
    std::size_t line_no = 0;
    bool saw_header = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim_cr(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (!saw_header) {
            if (line != header) {
                throw Error(ErrorKind::MalformedRow,
                            fmt::format("line 1: expected header '{}', got '{}'", header, line));
            }
            saw_header = true;
            continue;
        }
        if (line.empty()) {
            // Only trailing blank lines are tolerated.
            if (text.find_first_not_of("\r\n", pos) != std::string_view::npos) {
                throw Error(ErrorKind::MalformedRow, fmt::format("line {}: empty row", line_no));
            }
            break;
        }
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                               : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != n_values + 1) {
            throw Error(ErrorKind::MalformedRow, fmt::format("line {}: expected {} fields, got {}",
                                                             line_no, n_values + 1, fields.size()));
        }
        table.times.push_back(parse_number(fields[0], line_no));
        for (std::size_t c = 0; c < n_values; ++c) {
            table.columns[c].push_back(parse_number(fields[c + 1], line_no));
        }
        table.line_numbers.push_back(line_no);
    }
    if (!saw_header) {
        throw Error(ErrorKind::EmptyInput, "no header line");
    }
    if (table.times.empty()) {
        throw Error(ErrorKind::EmptyInput, "no data rows");
    }
    return table;
}

struct TimeGrid {
    double hop;
    std::size_t leading_frames;
};

TimeGrid infer_grid(const Table& table, double single_row_hop) {
    const auto& t = table.times;
    if (t.front() < 0.0) {
        throw Error(ErrorKind::RangeViolation,
                    fmt::format("line {}: negative time {}", table.line_numbers.front(), t.front()));
    }
    double hop = single_row_hop;
    if (t.size() > 1) {
        std::vector<double> deltas(t.size() - 1);
        for (std::size_t i = 1; i < t.size(); ++i) {
            deltas[i - 1] = t[i] - t[i - 1];
            if (!(deltas[i - 1] > 0.0)) {
                throw Error(ErrorKind::NonUniformHop,
                            fmt::format("line {}: time not strictly increasing",
                                        table.line_numbers[i]));
            }
        }
        auto sorted = deltas;
        std::sort(sorted.begin(), sorted.end());
        const auto mid = sorted.size() / 2;
        hop = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
        for (std::size_t i = 0; i < deltas.size(); ++i) {
            if (std::abs(deltas[i] - hop) > kSpacingTolerance + kFloatSlack) {
                throw Error(ErrorKind::NonUniformHop,
                            fmt::format("line {}: spacing {:.9f} deviates from hop {:.9f}",
                                        table.line_numbers[i + 1], deltas[i], hop));
            }
        }
    }
    const double steps = t.front() / hop;
    const double whole = std::round(steps);
    if (std::abs(t.front() - whole * hop) > kSpacingTolerance + kFloatSlack) {
        throw Error(ErrorKind::NonUniformHop,
                    fmt::format("first time {} is not a whole number of hops ({})", t.front(), hop));
    }
    return {hop, static_cast<std::size_t>(whole)};
}

std::string format_row(double time, double a, double b) {
    return fmt::format("{:.6f},{:.6f},{:.6f}\n", time, a, b);
}

} // namespace

PitchContour parse_contour_csv(std::string_view text, std::string track_id, double single_row_hop) {
    const auto table = read_table(text, "time_sec,f0_hz,confidence", 2);
    const auto grid = infer_grid(table, single_row_hop);
    std::vector<PitchFrame> frames(grid.leading_frames, PitchFrame{});
    frames.reserve(grid.leading_frames + table.times.size());
    for (std::size_t i = 0; i < table.times.size(); ++i) {
        PitchFrame frame{table.columns[0][i], table.columns[1][i]};
        try {
            validate_frame(frame);
        } catch (const Error& e) {
            throw Error(ErrorKind::RangeViolation,
                        fmt::format("line {}: {}", table.line_numbers[i], e.what()));
        }
        frames.push_back(frame);
    }
    return PitchContour(grid.hop, std::move(frames), std::move(track_id));
}

std::string write_contour_csv(const PitchContour& contour) {
    std::string out = "time_sec,f0_hz,confidence\n";
    const auto frames = contour.frames();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        out += format_row(static_cast<double>(i) * contour.hop(), frames[i].f0, frames[i].confidence);
    }
    return out;
}

Envelope parse_envelope_csv(std::string_view text, double single_row_hop) {
    const auto table = read_table(text, "time_sec,strength", 1);
    const auto grid = infer_grid(table, single_row_hop);
    Envelope env{grid.hop, std::vector<double>(grid.leading_frames, 0.0)};
    for (std::size_t i = 0; i < table.times.size(); ++i) {
        const double v = table.columns[0][i];
        if (v < 0.0) {
            throw Error(ErrorKind::RangeViolation,
                        fmt::format("line {}: negative strength {}", table.line_numbers[i], v));
        }
        env.values.push_back(v);
    }
    return env;
}

std::string write_envelope_csv(const Envelope& envelope) {
    std::string out = "time_sec,strength\n";
    for (std::size_t i = 0; i < envelope.values.size(); ++i) {
        out += fmt::format("{:.6f},{:.6f}\n", static_cast<double>(i) * envelope.hop,
                           envelope.values[i]);
    }
    return out;
}

} // namespace vocalnote
