#pragma once

#include "vocalnote/quantizer.h"

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vocalnote {

/// Matching criteria, ordered from loosest to strictest.
enum class MatchLevel { COn = 0, COnP = 1, COnPOff = 2 };

inline constexpr std::array<MatchLevel, 3> kAllLevels{MatchLevel::COn, MatchLevel::COnP,
                                                      MatchLevel::COnPOff};

std::string_view to_string(MatchLevel level);

struct EvalConfig {
    double onset_tolerance = 0.05;
    double offset_min_tolerance = 0.05;
    double offset_ratio = 0.2;
    double pitch_tolerance_cents = 50.0;
};

void validate_config(const EvalConfig& config);

/// (reference index, estimate index)
using MatchPair = std::pair<std::size_t, std::size_t>;

struct LevelScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<MatchPair> matches;
};

struct EvalReport {
    std::array<LevelScore, 3> levels;
    std::size_t n_ref = 0;
    std::size_t n_est = 0;

    const LevelScore& at(MatchLevel level) const { return levels[static_cast<std::size_t>(level)]; }
    LevelScore& at(MatchLevel level) { return levels[static_cast<std::size_t>(level)]; }
};

/// Offset window for a reference note: max(offset_min_tolerance, ratio * duration).
double offset_tolerance(const NoteEvent& ref, const EvalConfig& config);

/// Whether `est` may be matched to `ref` at `level`. All tolerances are inclusive.
bool is_valid_pair(const NoteEvent& ref, const NoteEvent& est, const EvalConfig& config,
                   MatchLevel level);

/// Maximum-cardinality one-to-one matching over the valid pairs, via
/// augmenting paths. Pairs are returned sorted by reference index.
std::vector<MatchPair> match_valid(std::span<const NoteEvent> ref, std::span<const NoteEvent> est,
                                   const EvalConfig& config, MatchLevel level);

double f1_score(double precision, double recall);

EvalReport score(const NoteSequence& ref, const NoteSequence& est, const EvalConfig& config = {});

/// Unweighted per-track mean of precision, recall and F1. n_ref / n_est are
/// corpus totals and match lists are left empty.
EvalReport score_corpus(std::span<const std::pair<NoteSequence, NoteSequence>> pairs,
                        const EvalConfig& config = {});

/// `{"COn": {"precision": ..., "recall": ..., "f1": ...}, "COnP": ..., "COnPOff": ...,
/// "n_ref": ..., "n_est": ...}` with 6-decimal floats.
std::string write_report_json(const EvalReport& report);

} // namespace vocalnote
