#include "vocalnote/midi.h"

#include "vocalnote/error.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <tuple>
#include <vector>

namespace vocalnote {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>(v & 0xFF));
}

void put_vlq(std::string& out, std::uint32_t v) {
    char buf[5];
    int n = 0;
    buf[n++] = static_cast<char>(v & 0x7F);
    while ((v >>= 7) != 0) buf[n++] = static_cast<char>(0x80 | (v & 0x7F));
    while (n > 0) out.push_back(buf[--n]);
}

[[noreturn]] void malformed(const std::string& what) {
    throw Error(ErrorKind::SchemaViolation, "MIDI: " + what);
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    bool done() const { return pos_ >= data_.size(); }
    std::size_t pos() const { return pos_; }

    std::uint8_t u8() {
        if (pos_ >= data_.size()) malformed("unexpected end of data");
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint8_t peek() const {
        if (pos_ >= data_.size()) malformed("unexpected end of data");
        return static_cast<std::uint8_t>(data_[pos_]);
    }
    std::uint32_t u16() { return (std::uint32_t{u8()} << 8) | u8(); }
    std::uint32_t u32() { return (u16() << 16) | u16(); }
    std::uint32_t vlq() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const auto b = u8();
            v = (v << 7) | (b & 0x7F);
            if ((b & 0x80) == 0) return v;
        }
        malformed("variable-length quantity longer than 4 bytes");
    }
    std::string_view take(std::size_t n) {
        if (n > data_.size() - pos_) malformed("chunk runs past end of data");
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

struct RawNote {
    std::int64_t on_tick;
    std::int64_t off_tick;
    int pitch;
};

} // namespace

std::int64_t seconds_to_ticks(double seconds, double bpm) {
    return std::llround(seconds * bpm / 60.0 * kTicksPerQuarter);
}

std::string export_midi(const NoteSequence& seq, double bpm) {
    if (!(bpm >= kMinBpm && bpm <= kMaxBpm)) {
        throw Error(ErrorKind::RangeViolation, fmt::format("bpm {} outside [{}, {}]", bpm, kMinBpm, kMaxBpm));
    }
    validate_notes(seq);

    // (tick, kind, pitch): kind 0 = note-off sorts before 1 = note-on at equal ticks.
    std::vector<std::tuple<std::int64_t, int, int>> events;
    for (const auto& n : seq.notes) {
        const auto on = seconds_to_ticks(n.onset, bpm);
        const auto off = std::max(on + 1, seconds_to_ticks(n.offset, bpm));
        events.emplace_back(on, 1, n.pitch);
        events.emplace_back(off, 0, n.pitch);
    }
    std::stable_sort(events.begin(), events.end());

    std::string track;
    const auto tempo = static_cast<std::uint32_t>(std::llround(60'000'000.0 / bpm));
    put_vlq(track, 0);
    track += "\xFF\x51\x03";
    track.push_back(static_cast<char>((tempo >> 16) & 0xFF));
    track.push_back(static_cast<char>((tempo >> 8) & 0xFF));
    track.push_back(static_cast<char>(tempo & 0xFF));

    std::int64_t last = 0;
    for (const auto& [tick, kind, pitch] : events) {
        put_vlq(track, static_cast<std::uint32_t>(tick - last));
        last = tick;
        track.push_back(static_cast<char>(kind == 1 ? 0x90 : 0x80));
        track.push_back(static_cast<char>(pitch));
        track.push_back(static_cast<char>(kind == 1 ? kExportVelocity : 0));
    }
    put_vlq(track, 0);
    track += std::string("\xFF\x2F\x00", 3);

    std::string out = "MThd";
    put_u32(out, 6);
    put_u16(out, 0);
    put_u16(out, 1);
    put_u16(out, kTicksPerQuarter);
    out += "MTrk";
    put_u32(out, static_cast<std::uint32_t>(track.size()));
    out += track;
    return out;
}

ImportedMidi import_midi(std::string_view bytes) {
    Reader file(bytes);
    if (file.take(4) != "MThd") malformed("missing MThd header");
    const auto header_len = file.u32();
    if (header_len < 6) malformed("short header chunk");
    const auto format = file.u16();
    const auto n_tracks = file.u16();
    const auto division = file.u16();
    file.take(header_len - 6);
    if (format > 1) malformed(fmt::format("unsupported format {}", format));
    if ((division & 0x8000) != 0 || division == 0) malformed("only ticks-per-quarter division is supported");

    std::map<std::int64_t, std::uint32_t> tempo_map; // tick -> microseconds per quarter
    std::vector<RawNote> notes;

    for (std::uint32_t t = 0; t < n_tracks; ++t) {
        if (file.take(4) != "MTrk") malformed("missing MTrk chunk");
        const auto len = file.u32();
        Reader trk(file.take(len));
        std::int64_t tick = 0;
        std::uint8_t status = 0;
        std::map<int, std::deque<std::int64_t>> open; // pitch -> pending onsets
        bool ended = false;
        while (!trk.done() && !ended) {
            tick += trk.vlq();
            std::uint8_t b = trk.peek();
            if (b & 0x80) {
                status = trk.u8();
            } else if (status == 0) {
                malformed("running status without a prior status byte");
            }
            if (status == 0xFF) {
                const auto type = trk.u8();
                const auto meta = trk.take(trk.vlq());
                if (type == 0x51) {
                    if (meta.size() != 3) malformed("tempo event must carry 3 bytes");
                    const auto us = (std::uint32_t{static_cast<std::uint8_t>(meta[0])} << 16) |
                                    (std::uint32_t{static_cast<std::uint8_t>(meta[1])} << 8) |
                                    static_cast<std::uint8_t>(meta[2]);
                    if (us == 0) malformed("zero tempo");
                    tempo_map.emplace(tick, us);
                } else if (type == 0x2F) {
                    ended = true;
                }
                status = 0;
                continue;
            }
            if (status == 0xF0 || status == 0xF7) {
                trk.take(trk.vlq());
                status = 0;
                continue;
            }
            const int kind = status & 0xF0;
            const int data_len = (kind == 0xC0 || kind == 0xD0) ? 1 : 2;
            const int d1 = trk.u8();
            const int d2 = data_len == 2 ? trk.u8() : 0;
            if (kind == 0x90 && d2 > 0) {
                open[d1].push_back(tick);
            } else if (kind == 0x80 || (kind == 0x90 && d2 == 0)) {
                auto& pending = open[d1];
                if (pending.empty()) continue;
                notes.push_back({pending.front(), tick, d1});
                pending.pop_front();
            }
        }
    }
    if (tempo_map.empty() || tempo_map.begin()->first != 0) {
        tempo_map.emplace(0, 500'000);
    }
    ImportedMidi result;
    result.bpm = 60'000'000.0 / tempo_map.begin()->second;

    const auto to_seconds = [&](std::int64_t tick) {
        double seconds = 0.0;
        for (auto it = tempo_map.begin(); it != tempo_map.end(); ++it) {
            const auto next = std::next(it);
            const std::int64_t end = next == tempo_map.end() ? tick : std::min(tick, next->first);
            if (end <= it->first) break;
            seconds += static_cast<double>(end - it->first) * it->second / 1e6 / division;
        }
        return seconds;
    };

    std::sort(notes.begin(), notes.end(), [](const RawNote& a, const RawNote& b) {
        return std::tie(a.on_tick, a.off_tick, a.pitch) < std::tie(b.on_tick, b.off_tick, b.pitch);
    });
    for (const auto& n : notes) {
        if (n.off_tick <= n.on_tick) continue;
        result.notes.notes.push_back({to_seconds(n.on_tick), to_seconds(n.off_tick), n.pitch});
    }
    validate_notes(result.notes);
    return result;
}

} // namespace vocalnote
