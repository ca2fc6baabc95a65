#include "vocalnote/eval.h"

#include "vocalnote/error.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>

namespace vocalnote {

namespace {

// Absorbs representation error in differences of decimal timestamps
// (1.05 - 1.00 > 0.05 in binary) while keeping 1e-9 overshoots out.
constexpr double kTimeSlack = 1e-10;

} // namespace

std::string_view to_string(MatchLevel level) {
    switch (level) {
    case MatchLevel::COn: return "COn";
    case MatchLevel::COnP: return "COnP";
    case MatchLevel::COnPOff: return "COnPOff";
    }
    return "?";
}

void validate_config(const EvalConfig& config) {
    if (!(config.onset_tolerance > 0.0 && config.offset_min_tolerance > 0.0 &&
          config.offset_ratio > 0.0 && config.pitch_tolerance_cents > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "evaluation tolerances must be positive");
    }
}

double offset_tolerance(const NoteEvent& ref, const EvalConfig& config) {
    return std::max(config.offset_min_tolerance, config.offset_ratio * (ref.offset - ref.onset));
}

bool is_valid_pair(const NoteEvent& ref, const NoteEvent& est, const EvalConfig& config,
                   MatchLevel level) {
    if (std::abs(ref.onset - est.onset) > config.onset_tolerance + kTimeSlack) return false;
    if (level == MatchLevel::COn) return true;
    const double cents = std::abs(100.0 * static_cast<double>(ref.pitch - est.pitch));
    if (cents > config.pitch_tolerance_cents) return false;
    if (level == MatchLevel::COnP) return true;
    return std::abs(ref.offset - est.offset) <= offset_tolerance(ref, config) + kTimeSlack;
}

std::vector<MatchPair> match_valid(std::span<const NoteEvent> ref, std::span<const NoteEvent> est,
                                   const EvalConfig& config, MatchLevel level) {
    std::vector<std::vector<std::size_t>> adjacency(ref.size());
    for (std::size_t r = 0; r < ref.size(); ++r) {
        for (std::size_t e = 0; e < est.size(); ++e) {
            if (is_valid_pair(ref[r], est[e], config, level)) adjacency[r].push_back(e);
        }
    }

    constexpr auto kFree = static_cast<std::size_t>(-1);
    std::vector<std::size_t> owner(est.size(), kFree);
    std::vector<char> visited(est.size());
    std::function<bool(std::size_t)> augment = [&](std::size_t r) {
        for (std::size_t e : adjacency[r]) {
            if (visited[e]) continue;
            visited[e] = 1;
            if (owner[e] == kFree || augment(owner[e])) {
                owner[e] = r;
                return true;
            }
        }
        return false;
    };
    for (std::size_t r = 0; r < ref.size(); ++r) {
        std::fill(visited.begin(), visited.end(), 0);
        augment(r);
    }

    std::vector<MatchPair> pairs;
    for (std::size_t e = 0; e < est.size(); ++e) {
        if (owner[e] != kFree) pairs.emplace_back(owner[e], e);
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

double f1_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

EvalReport score(const NoteSequence& ref, const NoteSequence& est, const EvalConfig& config) {
    validate_config(config);
    EvalReport report;
    report.n_ref = ref.notes.size();
    report.n_est = est.notes.size();
    for (auto level : kAllLevels) {
        auto& s = report.at(level);
        s.matches = match_valid(ref.notes, est.notes, config, level);
        const auto hits = static_cast<double>(s.matches.size());
        s.precision = report.n_est > 0 ? hits / static_cast<double>(report.n_est) : 0.0;
        s.recall = report.n_ref > 0 ? hits / static_cast<double>(report.n_ref) : 0.0;
        s.f1 = f1_score(s.precision, s.recall);
    }
    return report;
}

EvalReport score_corpus(std::span<const std::pair<NoteSequence, NoteSequence>> pairs,
                        const EvalConfig& config) {
    if (pairs.empty()) {
        throw Error(ErrorKind::EmptyCorpus, "no (reference, estimate) pairs to score");
    }
    EvalReport total;
    // Per-field values are summed in sorted order so the mean does not
    // depend on track order.
    std::array<std::array<std::vector<double>, 3>, 3> values;
    for (const auto& [ref, est] : pairs) {
        const auto track = score(ref, est, config);
        total.n_ref += track.n_ref;
        total.n_est += track.n_est;
        for (std::size_t l = 0; l < 3; ++l) {
            values[l][0].push_back(track.levels[l].precision);
            values[l][1].push_back(track.levels[l].recall);
            values[l][2].push_back(track.levels[l].f1);
        }
    }
    const auto mean = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        double sum = 0.0;
        for (double x : v) sum += x;
        return sum / static_cast<double>(v.size());
    };
    for (std::size_t l = 0; l < 3; ++l) {
        total.levels[l].precision = mean(values[l][0]);
        total.levels[l].recall = mean(values[l][1]);
        total.levels[l].f1 = mean(values[l][2]);
    }
    return total;
}

std::string write_report_json(const EvalReport& report) {
    std::string out = "{";
    for (auto level : kAllLevels) {
        const auto& s = report.at(level);
        out += fmt::format("\"{}\": {{\"precision\": {:.6f}, \"recall\": {:.6f}, \"f1\": {:.6f}}}, ",
                           to_string(level), s.precision, s.recall, s.f1);
    }
    out += fmt::format("\"n_ref\": {}, \"n_est\": {}}}\n", report.n_ref, report.n_est);
    return out;
}

} // namespace vocalnote
