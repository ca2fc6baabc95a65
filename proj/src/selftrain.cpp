#include "vocalnote/selftrain.h"

#include "vocalnote/contour.h"
#include "vocalnote/error.h"
#include "vocalnote/notes_io.h"
#include "vocalnote/process.h"
#include "vocalnote/tempo.h"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <mutex>
#include <set>

namespace vocalnote {

using nlohmann::json;

namespace {

void require_placeholders(std::string_view what, std::string_view command_template,
                          std::initializer_list<std::string_view> names) {
    for (auto name : names) {
        const auto n = count_placeholder(command_template, name);
        if (n != 1) {
            throw Error(ErrorKind::InvalidArgument,
                        fmt::format("{} template must contain {{{}}} exactly once (found {})", what, name, n));
        }
    }
}

fs::path absolute_path(const fs::path& p) {
    return fs::absolute(p).lexically_normal();
}

std::string relative_to_run(const RunContext& ctx, const fs::path& p) {
    return p.lexically_relative(absolute_path(ctx.run_dir)).generic_string();
}

fs::path resolve_in_run(const RunContext& ctx, const std::string& relative) {
    return absolute_path(ctx.run_dir) / relative;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json report_to_json(const EvalReport& report) {
    json j;
    for (auto level : kAllLevels) {
        const auto& s = report.at(level);
        j[std::string(to_string(level))] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
    }
    j["n_ref"] = report.n_ref;
    j["n_est"] = report.n_est;
    return j;
}

EvalReport report_from_json(const json& j) {
    EvalReport report;
    for (auto level : kAllLevels) {
        const auto& s = j.at(std::string(to_string(level)));
        report.at(level).precision = s.at("precision").get<double>();
        report.at(level).recall = s.at("recall").get<double>();
        report.at(level).f1 = s.at("f1").get<double>();
    }
    report.n_ref = j.at("n_ref").get<std::size_t>();
    report.n_est = j.at("n_est").get<std::size_t>();
    return report;
}

json config_to_json(const QuantizationConfig& config) {
    json fractions = json::array();
    for (const auto& f : config.filter_fractions) fractions.push_back(to_string(f));
    return {{"filter_fractions", fractions},
            {"min_fragment_fraction", to_string(config.min_fragment_fraction)},
            {"confidence_floor", config.confidence_floor},
            {"octave_context_seconds", config.octave_context_seconds}};
}

json eval_config_to_json(const EvalConfig& config) {
    return {{"onset_tolerance", config.onset_tolerance},
            {"offset_min_tolerance", config.offset_min_tolerance},
            {"offset_ratio", config.offset_ratio},
            {"pitch_tolerance_cents", config.pitch_tolerance_cents}};
}

json file_identity(const std::optional<fs::path>& path) {
    if (!path) return nullptr;
    std::error_code ec;
    const auto hash = fs::is_regular_file(*path, ec) ? sha256_file(*path) : std::string("missing");
    return {{"path", absolute_path(*path).string()}, {"sha256", hash}};
}

json data_identity(const DatasetManifest& data) {
    json entries = json::array();
    for (const auto& e : data.entries) {
        entries.push_back({{"track_id", e.track_id},
                           {"audio", file_identity(e.audio_path)},
                           {"contour", file_identity(e.contour_path)},
                           {"gold", file_identity(e.gold_notes_path)},
                           {"bpm", e.bpm ? json(*e.bpm) : json(nullptr)}});
    }
    return {{"role", to_string(data.role)}, {"entries", entries}};
}

json model_identity(const ExternalModelSpec& spec) {
    std::error_code ec;
    json artifact = spec.model_artifact;
    if (!spec.model_artifact.empty() && fs::is_regular_file(spec.model_artifact, ec)) {
        artifact = {{"path", spec.model_artifact}, {"sha256", sha256_file(spec.model_artifact)}};
    }
    return {{"predict", spec.predict_command}, {"train", spec.train_command}, {"artifact", artifact}};
}

std::string fingerprint_of(const json& identity) {
    return sha256_hex(identity.dump());
}

/// An existing manifest is reused only if it was produced from the same
/// inputs and every output it lists is still on disk unchanged.
bool outputs_intact(const IterationManifest& m, const RunContext& ctx) {
    std::error_code ec;
    for (const auto& [path, hash] : m.output_hashes) {
        const auto full = resolve_in_run(ctx, path);
        if (!fs::exists(full, ec)) return false;
        if (hash != "dir" && (!fs::is_regular_file(full, ec) || sha256_file(full) != hash)) return false;
    }
    return true;
}

std::optional<IterationManifest> load_if_valid(const RunContext& ctx, int iteration,
                                               const std::string& fingerprint) {
    const auto path = manifest_path(ctx, iteration);
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) return std::nullopt;
    try {
        auto m = parse_iteration_manifest(read_file(path));
        if (m.iteration == iteration && m.fingerprint == fingerprint && outputs_intact(m, ctx)) return m;
    } catch (const Error&) {
    }
    return std::nullopt;
}

void record_output(IterationManifest& m, const RunContext& ctx, const fs::path& path) {
    std::error_code ec;
    m.output_hashes[relative_to_run(ctx, path)] =
        fs::is_regular_file(path, ec) ? sha256_file(path) : std::string("dir");
}

void persist(const IterationManifest& m, const RunContext& ctx, const std::string& started) {
    const auto dir = iteration_dir(ctx, m.iteration);
    write_file_atomic(dir / "timing.json",
                      json({{"started", started}, {"finished", utc_now()}}).dump(2) + "\n");
    write_file_atomic(manifest_path(ctx, m.iteration), write_iteration_manifest(m));
}

void run_checked(IterationManifest& m, const std::string& command, const fs::path& log) {
    m.commands.push_back(command);
    const int status = run_shell(command, log);
    if (status != 0) {
        throw Error(ErrorKind::CommandFailed,
                    fmt::format("exit status {} from `{}` (log: {})", status, command, log.string()));
    }
}

const fs::path& require_audio(const DatasetEntry& entry) {
    if (!entry.audio_path) {
        throw Error(ErrorKind::MissingInput, fmt::format("track {}: no audio_path", entry.track_id));
    }
    return *entry.audio_path;
}

/// Runs a predict template over `entries` (original audio) and returns each
/// track's expected contour path in the output directory.
std::vector<fs::path> predict_contours(IterationManifest& m, const ExternalModelSpec& spec,
                                       const std::string& model,
                                       const std::vector<const DatasetEntry*>& entries,
                                       const fs::path& work_dir) {
    std::string list;
    for (const auto* e : entries) {
        list += fmt::format("{}\t{}\n", e->track_id, absolute_path(require_audio(*e)).string());
    }
    const auto list_path = work_dir / "input_list.tsv";
    const auto out_dir = work_dir / "pred";
    write_file_atomic(list_path, list);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    const auto command = expand_template(spec.predict_command, {{"input_list", list_path.string()},
                                                                 {"output_dir", out_dir.string()},
                                                                 {"model", model}});
    run_checked(m, command, work_dir / "commands.log");
    std::vector<fs::path> outputs;
    for (const auto* e : entries) outputs.push_back(out_dir / (e->track_id + ".contour.csv"));
    return outputs;
}

/// Model outputs must satisfy the contour CSV schema; any failure names the track.
PitchContour load_model_contour(const fs::path& path, const std::string& track_id) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw Error(ErrorKind::SchemaViolation,
                    fmt::format("track {}: model wrote no contour at {}", track_id, path.string()));
    }
    try {
        return parse_contour_csv(read_file(path), track_id);
    } catch (const Error& e) {
        throw Error(ErrorKind::SchemaViolation, fmt::format("track {}: {}", track_id, e.what()));
    }
}

double resolve_bpm(const DatasetEntry& entry, const PitchContour& contour, const RunContext& ctx,
                   const QuantizationConfig& config) {
    if (entry.bpm) return *entry.bpm;
    if (ctx.bpm_override) return *ctx.bpm_override;
    try {
        return estimate_tempo(envelope_from_contour(contour, config.confidence_floor), contour.hop()).bpm();
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::EnvelopeTooShort && e.kind() != ErrorKind::DegenerateEnvelope) throw;
        // No usable rhythm in the contour: fall back to the estimator's prior centre.
        return TempoEstimatorConfig{}.prior_center_bpm;
    }
}

NoteSequence load_gold(const DatasetEntry& entry) {
    auto gold = parse_notes_json(read_file(*entry.gold_notes_path));
    gold.track_id = entry.track_id;
    return gold;
}

std::optional<EvalReport> score_against_gold(const DatasetManifest& data,
                                             const std::map<std::string, NoteSequence>& estimates,
                                             const EvalConfig& config) {
    std::vector<std::pair<NoteSequence, NoteSequence>> pairs;
    for (const auto& e : data.entries) {
        if (!e.gold_notes_path) continue;
        const auto it = estimates.find(e.track_id);
        if (it == estimates.end()) continue;
        pairs.emplace_back(load_gold(e), it->second);
    }
    if (pairs.empty()) return std::nullopt;
    return score_corpus(pairs, config);
}

} // namespace

void validate_predict_template(const ExternalModelSpec& spec) {
    require_placeholders("predict", spec.predict_command, {"input_list", "output_dir"});
    if (count_placeholder(spec.predict_command, "model") > 1) {
        throw Error(ErrorKind::InvalidArgument, "predict template may contain {model} at most once");
    }
}

void validate_train_template(const ExternalModelSpec& spec) {
    require_placeholders("train", spec.train_command, {"label_manifest", "output_model", "seed"});
}

void validate_augmenter(const AugmenterSpec& spec) {
    if (spec.enabled) require_placeholders("augment", spec.command, {"input_audio", "output_audio", "seed"});
}

std::string_view to_string(DatasetRole role) {
    switch (role) {
    case DatasetRole::Unlabeled: return "unlabeled";
    case DatasetRole::Labeled: return "labeled";
    case DatasetRole::Test: return "test";
    }
    return "?";
}

std::string_view to_string(TrainingMode mode) {
    return mode == TrainingMode::TS ? "TS" : "NS";
}

TrainingMode parse_training_mode(std::string_view text) {
    if (text == "TS") return TrainingMode::TS;
    if (text == "NS") return TrainingMode::NS;
    throw Error(ErrorKind::InvalidArgument, fmt::format("mode must be TS or NS, got '{}'", text));
}

DatasetManifest parse_dataset_manifest(std::string_view text, const fs::path& base_dir) {
    DatasetManifest data;
    try {
        const auto doc = json::parse(text);
        const auto role = doc.value("role", std::string("unlabeled"));
        if (role == "unlabeled") {
            data.role = DatasetRole::Unlabeled;
        } else if (role == "labeled") {
            data.role = DatasetRole::Labeled;
        } else if (role == "test") {
            data.role = DatasetRole::Test;
        } else {
            throw Error(ErrorKind::SchemaViolation, fmt::format("unknown dataset role '{}'", role));
        }
        const auto path_field = [&](const json& item, const char* key) -> std::optional<fs::path> {
            if (!item.contains(key) || item.at(key).is_null()) return std::nullopt;
            fs::path p = item.at(key).get<std::string>();
            return p.is_relative() ? base_dir / p : p;
        };
        std::set<std::string> seen;
        for (const auto& item : doc.at("entries")) {
            DatasetEntry e;
            e.track_id = item.at("track_id").get<std::string>();
            if (e.track_id.empty() || e.track_id.find_first_of("/\t\n") != std::string::npos) {
                throw Error(ErrorKind::SchemaViolation, fmt::format("invalid track_id '{}'", e.track_id));
            }
            if (!seen.insert(e.track_id).second) {
                throw Error(ErrorKind::SchemaViolation, fmt::format("duplicate track_id '{}'", e.track_id));
            }
            e.audio_path = path_field(item, "audio_path");
            e.contour_path = path_field(item, "contour_path");
            e.gold_notes_path = path_field(item, "gold_notes_path");
            if (item.contains("bpm") && !item.at("bpm").is_null()) {
                e.bpm = item.at("bpm").get<double>();
                BeatGrid(*e.bpm, 1.0);
            }
            data.entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaViolation, fmt::format("dataset manifest: {}", e.what()));
    }
    return data;
}

std::string write_iteration_manifest(const IterationManifest& m) {
    json tracks = json::array();
    for (const auto& t : m.tracks) {
        tracks.push_back({{"track_id", t.track_id}, {"bpm", t.bpm}, {"labels", t.labels}});
    }
    json doc = {{"iteration", m.iteration},
                {"mode", m.mode},
                {"teacher", m.teacher},
                {"pseudo_label_dir", m.pseudo_label_dir},
                {"student_model", m.student_model},
                {"rng_seed", m.rng_seed},
                {"fingerprint", m.fingerprint},
                {"label_pipeline", m.label_pipeline},
                {"tracks", tracks},
                {"commands", m.commands},
                {"output_hashes", m.output_hashes},
                {"quality", m.quality ? report_to_json(*m.quality) : json(nullptr)},
                {"raw_quality", m.raw_quality ? report_to_json(*m.raw_quality) : json(nullptr)}};
    return doc.dump(2) + "\n";
}

IterationManifest parse_iteration_manifest(std::string_view text) {
    IterationManifest m;
    try {
        const auto doc = json::parse(text);
        m.iteration = doc.at("iteration").get<int>();
        m.mode = doc.at("mode").get<std::string>();
        m.teacher = doc.at("teacher").get<std::string>();
        m.pseudo_label_dir = doc.at("pseudo_label_dir").get<std::string>();
        m.student_model = doc.at("student_model").get<std::string>();
        m.rng_seed = doc.at("rng_seed").get<std::uint32_t>();
        m.fingerprint = doc.at("fingerprint").get<std::string>();
        m.label_pipeline = doc.at("label_pipeline").get<std::string>();
        for (const auto& t : doc.at("tracks")) {
            m.tracks.push_back({t.at("track_id").get<std::string>(), t.at("bpm").get<double>(),
                                t.at("labels").get<std::string>()});
        }
        m.commands = doc.at("commands").get<std::vector<std::string>>();
        m.output_hashes = doc.at("output_hashes").get<std::map<std::string, std::string>>();
        if (!doc.at("quality").is_null()) m.quality = report_from_json(doc.at("quality"));
        if (!doc.at("raw_quality").is_null()) m.raw_quality = report_from_json(doc.at("raw_quality"));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaViolation, fmt::format("iteration manifest: {}", e.what()));
    }
    return m;
}

fs::path iteration_dir(const RunContext& ctx, int iteration) {
    return absolute_path(ctx.run_dir) / fmt::format("iter{}", iteration);
}

fs::path manifest_path(const RunContext& ctx, int iteration) {
    return iteration_dir(ctx, iteration) / "manifest.json";
}

IterationManifest generate_initial_labels(const DatasetManifest& data,
                                          const ExternalModelSpec& pitch_model,
                                          const QuantizationConfig& config, const RunContext& ctx) {
    validate_config(config);
    if (data.entries.empty()) throw Error(ErrorKind::MissingInput, "dataset manifest has no entries");

    std::vector<const DatasetEntry*> to_predict;
    for (const auto& e : data.entries) {
        if (!e.contour_path) to_predict.push_back(&e);
    }
    if (!to_predict.empty()) validate_predict_template(pitch_model);

    const json identity = {{"stage", "initial"},
                           {"data", data_identity(data)},
                           {"pitch_model", to_predict.empty() ? json(nullptr) : model_identity(pitch_model)},
                           {"config", config_to_json(config)},
                           {"bpm_override", ctx.bpm_override ? json(*ctx.bpm_override) : json(nullptr)},
                           {"eval", eval_config_to_json(ctx.eval_config)}};
    const auto fingerprint = fingerprint_of(identity);
    if (auto existing = load_if_valid(ctx, 0, fingerprint)) return *existing;

    const auto started = utc_now();
    const auto dir = iteration_dir(ctx, 0);
    IterationManifest m;
    m.iteration = 0;
    m.mode = "initial";
    m.teacher = std::string(kInitialTeacher);
    m.fingerprint = fingerprint;
    m.pseudo_label_dir = relative_to_run(ctx, dir / "labels");

    std::map<std::string, fs::path> predicted;
    if (!to_predict.empty()) {
        const auto outputs = predict_contours(m, pitch_model, pitch_model.model_artifact, to_predict, dir / "pitch");
        for (std::size_t i = 0; i < to_predict.size(); ++i) predicted[to_predict[i]->track_id] = outputs[i];
    }

    const auto n = data.entries.size();
    std::vector<TrackRecord> records(n);
    std::vector<NoteSequence> labels(n);
    std::vector<std::optional<NoteSequence>> raw(n);
    parallel_for(n, ctx.jobs, [&](std::size_t i) {
        const auto& e = data.entries[i];
        const auto contour = e.contour_path
                                 ? [&] {
                                       try {
                                           return parse_contour_csv(read_file(*e.contour_path), e.track_id);
                                       } catch (const Error& err) {
                                           if (err.kind() == ErrorKind::MissingInput) throw;
                                           throw Error(ErrorKind::SchemaViolation,
                                                       fmt::format("track {}: {}", e.track_id, err.what()));
                                       }
                                   }()
                                 : load_model_contour(predicted.at(e.track_id), e.track_id);
        const double bpm = resolve_bpm(e, contour, ctx, config);
        labels[i] = convert(contour, BeatGrid(bpm, contour.hop()), config);
        if (e.gold_notes_path) raw[i] = segment_notes(quantize_pitch(contour, config), e.track_id);
        const auto path = dir / "labels" / (e.track_id + ".notes.json");
        write_file_atomic(path, write_notes_json(labels[i]));
        records[i] = {e.track_id, bpm, relative_to_run(ctx, path)};
    });

    std::map<std::string, NoteSequence> label_map;
    std::map<std::string, NoteSequence> raw_map;
    for (std::size_t i = 0; i < n; ++i) {
        label_map[records[i].track_id] = labels[i];
        if (raw[i]) raw_map[records[i].track_id] = *raw[i];
        record_output(m, ctx, resolve_in_run(ctx, records[i].labels));
    }
    m.tracks = std::move(records);
    m.quality = score_against_gold(data, label_map, ctx.eval_config);
    m.raw_quality = score_against_gold(data, raw_map, ctx.eval_config);
    persist(m, ctx, started);
    return m;
}

IterationManifest run_iteration(int k, const IterationManifest& prev, const DatasetManifest& data,
                                const ExternalModelSpec& model, const AugmenterSpec& augmenter,
                                TrainingMode mode, const QuantizationConfig& config,
                                std::uint32_t seed, const RunContext& ctx) {
    validate_config(config);
    if (mode == TrainingMode::NS && !augmenter.enabled) {
        throw Error(ErrorKind::AugmenterRequired, "NS mode needs an enabled augmenter");
    }
    if (mode == TrainingMode::NS) validate_augmenter(augmenter);
    validate_predict_template(model);
    validate_train_template(model);
    if (k < 1 || prev.iteration != k - 1) {
        throw Error(ErrorKind::StaleManifest,
                    fmt::format("iteration {} cannot follow iteration {}", k, prev.iteration));
    }
    if (!outputs_intact(prev, ctx)) {
        throw Error(ErrorKind::StaleManifest,
                    fmt::format("outputs of iteration {} are missing or modified", prev.iteration));
    }
    std::map<std::string, const TrackRecord*> prev_tracks;
    for (const auto& t : prev.tracks) prev_tracks[t.track_id] = &t;
    for (const auto& e : data.entries) {
        if (!prev_tracks.count(e.track_id)) {
            throw Error(ErrorKind::StaleManifest,
                        fmt::format("track {} missing from iteration {}", e.track_id, prev.iteration));
        }
    }

    const json identity = {{"stage", "iteration"},
                           {"k", k},
                           {"prev", sha256_hex(write_iteration_manifest(prev))},
                           {"data", data_identity(data)},
                           {"model", model_identity(model)},
                           {"augmenter", mode == TrainingMode::NS ? json(augmenter.command) : json(nullptr)},
                           {"mode", to_string(mode)},
                           {"config", config_to_json(config)},
                           {"seed", seed},
                           {"eval", eval_config_to_json(ctx.eval_config)}};
    const auto fingerprint = fingerprint_of(identity);
    if (auto existing = load_if_valid(ctx, k, fingerprint)) return *existing;

    const auto started = utc_now();
    const auto dir = iteration_dir(ctx, k);
    IterationManifest m;
    m.iteration = k;
    m.mode = std::string(to_string(mode));
    m.teacher = k == 1 ? std::string(kInitialTeacher) : prev.student_model;
    m.rng_seed = seed;
    m.fingerprint = fingerprint;

    std::vector<const DatasetEntry*> entries;
    for (const auto& e : data.entries) entries.push_back(&e);
    for (const auto* e : entries) require_audio(*e);

    // (1)-(2) Teacher labels, post-processed into hard notes.
    if (k == 1) {
        m.pseudo_label_dir = prev.pseudo_label_dir;
        for (const auto* e : entries) m.tracks.push_back(*prev_tracks.at(e->track_id));
    } else {
        const auto teacher_model = resolve_in_run(ctx, prev.student_model).string();
        const auto outputs = predict_contours(m, model, teacher_model, entries, dir / "teacher");
        m.pseudo_label_dir = relative_to_run(ctx, dir / "labels");
        m.tracks.resize(entries.size());
        parallel_for(entries.size(), ctx.jobs, [&](std::size_t i) {
            const auto& id = entries[i]->track_id;
            const auto contour = load_model_contour(outputs[i], id);
            const double bpm = prev_tracks.at(id)->bpm;
            const auto notes = convert(contour, BeatGrid(bpm, contour.hop()), config);
            const auto path = dir / "labels" / (id + ".notes.json");
            write_file_atomic(path, write_notes_json(notes));
            m.tracks[i] = {id, bpm, relative_to_run(ctx, path)};
        });
        for (const auto& t : m.tracks) record_output(m, ctx, resolve_in_run(ctx, t.labels));
    }

    // (3) Noisy student: perturb the student's inputs only.
    std::vector<fs::path> train_audio(entries.size());
    std::vector<std::string> augment_commands(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) train_audio[i] = absolute_path(*entries[i]->audio_path);
    if (mode == TrainingMode::NS) {
        parallel_for(entries.size(), ctx.jobs, [&](std::size_t i) {
            const auto& id = entries[i]->track_id;
            const auto out = dir / "augmented" / (id + train_audio[i].extension().string());
            std::error_code ec;
            fs::create_directories(out.parent_path(), ec);
            const auto track_seed = derive_seed(seed, id);
            augment_commands[i] = expand_template(augmenter.command,
                                                  {{"input_audio", train_audio[i].string()},
                                                   {"output_audio", out.string()},
                                                   {"seed", std::to_string(track_seed)}});
            const auto log = dir / "augmented" / (id + ".log");
            const int status = run_shell(augment_commands[i], log);
            if (status != 0 || !fs::is_regular_file(out, ec)) {
                throw Error(ErrorKind::CommandFailed,
                            fmt::format("track {}: augmenter exit status {} (log: {})", id, status, log.string()));
            }
            train_audio[i] = out;
        });
        for (std::size_t i = 0; i < entries.size(); ++i) {
            m.commands.push_back(augment_commands[i]);
            record_output(m, ctx, train_audio[i]);
        }
    }

    // (4) Train the student on the hard labels.
    std::string label_manifest;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        label_manifest += fmt::format("{}\t{}\t{}\n", m.tracks[i].track_id, train_audio[i].string(),
                                      resolve_in_run(ctx, m.tracks[i].labels).string());
    }
    const auto label_manifest_path = dir / "label_manifest.tsv";
    write_file_atomic(label_manifest_path, label_manifest);
    record_output(m, ctx, label_manifest_path);
    const auto student = dir / "student.model";
    run_checked(m, expand_template(model.train_command, {{"label_manifest", label_manifest_path.string()},
                                                          {"output_model", student.string()},
                                                          {"seed", std::to_string(seed)}}),
                dir / "train.log");
    std::error_code ec;
    if (!fs::exists(student, ec)) {
        throw Error(ErrorKind::CommandFailed, fmt::format("train command produced no model at {}", student.string()));
    }
    m.student_model = relative_to_run(ctx, student);
    record_output(m, ctx, student);

    // (5) Quality of the new student on tracks with gold notes.
    std::vector<const DatasetEntry*> gold_entries;
    for (const auto* e : entries) {
        if (e->gold_notes_path) gold_entries.push_back(e);
    }
    if (!gold_entries.empty()) {
        const auto outputs = predict_contours(m, model, student.string(), gold_entries, dir / "eval");
        std::vector<NoteSequence> predictions(gold_entries.size());
        parallel_for(gold_entries.size(), ctx.jobs, [&](std::size_t i) {
            const auto& id = gold_entries[i]->track_id;
            const auto contour = load_model_contour(outputs[i], id);
            predictions[i] = convert(contour, BeatGrid(prev_tracks.at(id)->bpm, contour.hop()), config);
            write_file_atomic(dir / "eval" / "notes" / (id + ".notes.json"), write_notes_json(predictions[i]));
        });
        std::map<std::string, NoteSequence> estimates;
        for (std::size_t i = 0; i < gold_entries.size(); ++i) {
            estimates[gold_entries[i]->track_id] = predictions[i];
            record_output(m, ctx, dir / "eval" / "notes" / (gold_entries[i]->track_id + ".notes.json"));
        }
        m.quality = score_against_gold(data, estimates, ctx.eval_config);
    }

    persist(m, ctx, started);
    return m;
}

std::uint32_t iteration_seed(std::uint64_t seed, int iteration) {
    return derive_seed(seed, fmt::format("iteration-{}", iteration));
}

std::vector<IterationManifest> run_self_training(const SelfTrainingPlan& plan, const RunContext& ctx) {
    if (plan.iterations < 1) {
        throw Error(ErrorKind::InvalidArgument, "at least one self-training iteration is required");
    }
    if (plan.mode == TrainingMode::NS && !plan.augmenter.enabled) {
        throw Error(ErrorKind::AugmenterRequired, "NS mode needs an enabled augmenter");
    }
    std::vector<IterationManifest> chain;
    chain.push_back(generate_initial_labels(plan.data, plan.pitch_model, plan.config, ctx));
    for (int k = 1; k <= plan.iterations; ++k) {
        chain.push_back(run_iteration(k, chain.back(), plan.data, plan.student_model, plan.augmenter,
                                      plan.mode, plan.config, iteration_seed(plan.seed, k), ctx));
    }
    if (std::any_of(chain.begin(), chain.end(), [](const auto& m) { return m.quality.has_value(); })) {
        write_file_atomic(absolute_path(ctx.run_dir) / "quality_curve.json", write_quality_curve(chain));
    }
    return chain;
}

std::string write_quality_curve(const std::vector<IterationManifest>& manifests) {
    json points = json::array();
    for (const auto& m : manifests) {
        if (!m.quality) continue;
        json p = {{"iteration", m.iteration}};
        for (auto level : kAllLevels) p[std::string(to_string(level))] = m.quality->at(level).f1;
        if (m.raw_quality) p["raw_contour_COnP"] = m.raw_quality->at(MatchLevel::COnP).f1;
        points.push_back(p);
    }
    return json({{"iterations", points}}).dump(2) + "\n";
}

} // namespace vocalnote
