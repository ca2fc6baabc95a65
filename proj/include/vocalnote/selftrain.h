#pragma once

#include "vocalnote/eval.h"
#include "vocalnote/fsutil.h"
#include "vocalnote/quantizer.h"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vocalnote {

/// An external model driven through shell command templates.
///
/// predict_command must contain `{input_list}` and `{output_dir}` exactly once
/// and may reference `{model}`, which expands to the model being queried
/// (model_artifact for the pitch estimator, the previous student otherwise).
/// train_command must contain `{label_manifest}`, `{output_model}` and `{seed}`
/// exactly once.
struct ExternalModelSpec {
    std::string predict_command;
    std::string train_command;
    std::string model_artifact;
};

void validate_predict_template(const ExternalModelSpec& spec);
void validate_train_template(const ExternalModelSpec& spec);

/// `{input_audio}`, `{output_audio}` and `{seed}` exactly once when enabled.
struct AugmenterSpec {
    std::string command;
    bool enabled = false;
};

void validate_augmenter(const AugmenterSpec& spec);

enum class DatasetRole { Unlabeled, Labeled, Test };
std::string_view to_string(DatasetRole role);

struct DatasetEntry {
    std::string track_id;
    std::optional<fs::path> audio_path;
    std::optional<fs::path> contour_path;
    std::optional<fs::path> gold_notes_path;
    std::optional<double> bpm;
};

struct DatasetManifest {
    DatasetRole role = DatasetRole::Unlabeled;
    std::vector<DatasetEntry> entries;
};

/// JSON: {"role": "unlabeled", "entries": [{"track_id": ..., "audio_path": ...,
/// "contour_path": ..., "gold_notes_path": ..., "bpm": ...}]}. Relative paths
/// resolve against `base_dir`. Throws SchemaViolation on duplicate track ids.
DatasetManifest parse_dataset_manifest(std::string_view text, const fs::path& base_dir = {});

enum class TrainingMode { TS, NS };
std::string_view to_string(TrainingMode mode);
TrainingMode parse_training_mode(std::string_view text);

inline constexpr std::string_view kInitialTeacher = "initial-pseudo-labels";

/// Stage order applied to every pseudo-label written to disk.
inline constexpr std::string_view kLabelPipeline =
    "quantize_pitch>rhythm_quantize>remove_fragments>correct_octaves>segment_notes";

struct TrackRecord {
    std::string track_id;
    double bpm = 0.0;
    std::string labels; ///< notes JSON, relative to the run directory
};

/// Persistent record of one self-training iteration. Paths are relative to
/// the run directory. Wall-clock times live in a sibling timing.json so the
/// manifest itself is reproducible byte for byte.
struct IterationManifest {
    int iteration = 0;
    std::string mode;
    std::string teacher;
    std::string pseudo_label_dir;
    std::string student_model; ///< empty for iteration 0
    std::uint32_t rng_seed = 0;
    std::string fingerprint;
    std::string label_pipeline{kLabelPipeline};
    std::vector<TrackRecord> tracks;
    std::vector<std::string> commands;
    std::map<std::string, std::string> output_hashes;
    std::optional<EvalReport> quality;
    std::optional<EvalReport> raw_quality; ///< iteration 0 only: unfiltered pitch segmentation
};

std::string write_iteration_manifest(const IterationManifest& manifest);
IterationManifest parse_iteration_manifest(std::string_view text);

struct RunContext {
    fs::path run_dir;
    std::size_t jobs = 1;
    std::optional<double> bpm_override;
    EvalConfig eval_config;
};

fs::path iteration_dir(const RunContext& ctx, int iteration);
fs::path manifest_path(const RunContext& ctx, int iteration);

/// Iteration 0: contours (precomputed or predicted by `pitch_model`) are
/// converted to note labels. Reuses a valid existing manifest untouched.
IterationManifest generate_initial_labels(const DatasetManifest& data,
                                          const ExternalModelSpec& pitch_model,
                                          const QuantizationConfig& config, const RunContext& ctx);

/// Iteration k >= 1: teacher labels (iteration 0 labels for k = 1, previous
/// student predictions otherwise) are post-processed into hard labels, the
/// audio is augmented in NS mode, and a student is trained on them.
IterationManifest run_iteration(int k, const IterationManifest& prev, const DatasetManifest& data,
                                const ExternalModelSpec& model, const AugmenterSpec& augmenter,
                                TrainingMode mode, const QuantizationConfig& config,
                                std::uint32_t seed, const RunContext& ctx);

struct SelfTrainingPlan {
    DatasetManifest data;
    ExternalModelSpec pitch_model;
    ExternalModelSpec student_model;
    AugmenterSpec augmenter;
    TrainingMode mode = TrainingMode::NS;
    int iterations = 3;
    QuantizationConfig config;
    std::uint64_t seed = 0;
};

/// Iteration seed handed to run_iteration by run_self_training.
std::uint32_t iteration_seed(std::uint64_t seed, int iteration);

/// Runs iterations 0..plan.iterations, skipping those whose manifests still
/// validate, and writes quality_curve.json when any track has gold notes.
std::vector<IterationManifest> run_self_training(const SelfTrainingPlan& plan, const RunContext& ctx);

/// `{"iterations": [{"iteration": k, "COn": f1, "COnP": f1, "COnPOff": f1}, ...]}`
std::string write_quality_curve(const std::vector<IterationManifest>& manifests);

} // namespace vocalnote
