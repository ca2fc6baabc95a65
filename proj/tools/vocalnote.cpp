// vocalnote: pitch-contour to note conversion, note-level scoring, MIDI
// export and teacher-student self-training orchestration.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include "vocalnote/contour.h"
#include "vocalnote/error.h"
#include "vocalnote/eval.h"
#include "vocalnote/fsutil.h"
#include "vocalnote/midi.h"
#include "vocalnote/notes_io.h"
#include "vocalnote/quantizer.h"
#include "vocalnote/selftrain.h"
#include "vocalnote/tempo.h"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace vocalnote;

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct QuantFlags {
    std::string filters = "1/32,1/16,1/12";
    std::string min_fragment = "1/16";
    double confidence_floor = 0.5;
    double octave_context = 2.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--filters", filters, "Comma-separated median filter sizes in beats")
            ->capture_default_str();
        cmd->add_option("--min-fragment", min_fragment, "Shortest kept note, in beats")->capture_default_str();
        cmd->add_option("--confidence-floor", confidence_floor, "Frames below this confidence are unvoiced")
            ->capture_default_str();
        cmd->add_option("--octave-context", octave_context, "Octave-correction context, seconds")
            ->capture_default_str();
    }

    QuantizationConfig build() const {
        QuantizationConfig config;
        config.filter_fractions.clear();
        std::size_t start = 0;
        while (start <= filters.size()) {
            const auto comma = filters.find(',', start);
            const auto part = filters.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!part.empty()) config.filter_fractions.push_back(parse_beat_fraction(part));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        config.min_fragment_fraction = parse_beat_fraction(min_fragment);
        config.confidence_floor = confidence_floor;
        config.octave_context_seconds = octave_context;
        validate_config(config);
        return config;
    }
};

struct EvalFlags {
    EvalConfig config;

    void attach(CLI::App* cmd) {
        cmd->add_option("--onset-tol", config.onset_tolerance, "Onset tolerance, seconds")->capture_default_str();
        cmd->add_option("--offset-min-tol", config.offset_min_tolerance, "Minimum offset tolerance, seconds")
            ->capture_default_str();
        cmd->add_option("--offset-ratio", config.offset_ratio, "Offset tolerance as a fraction of duration")
            ->capture_default_str();
        cmd->add_option("--pitch-tol", config.pitch_tolerance_cents, "Pitch tolerance, cents")
            ->capture_default_str();
    }
};

fs::path default_notes_path(const fs::path& contour) {
    auto out = contour;
    out.replace_extension(".notes.json");
    return out;
}

int cmd_convert(const std::string& contour_path, const std::string& out_path, std::optional<double> bpm,
                const std::string& envelope_path, const std::string& track_id, double hop,
                const QuantFlags& quant) {
    const auto config = quant.build();
    const fs::path input(contour_path);
    const auto contour =
        parse_contour_csv(read_file(input), track_id.empty() ? input.stem().string() : track_id, hop);
    double tempo = 0.0;
    std::string source;
    if (bpm) {
        tempo = *bpm;
        source = "override";
    } else if (!envelope_path.empty()) {
        const auto env = parse_envelope_csv(read_file(envelope_path), hop);
        tempo = estimate_tempo(env.values, env.hop).bpm();
        source = "envelope";
    } else {
        tempo = estimate_tempo(envelope_from_contour(contour, config.confidence_floor), contour.hop()).bpm();
        source = "contour";
    }
    const auto notes = convert(contour, BeatGrid(tempo, contour.hop()), config);
    const fs::path out = out_path.empty() ? default_notes_path(input) : fs::path(out_path);
    write_file_atomic(out, write_notes_json(notes));
    fmt::print("n_notes={} bpm={:.6f} bpm_source={} out={}\n", notes.notes.size(), tempo, source, out.string());
    return 0;
}

int cmd_tempo(const std::string& contour_path, const std::string& envelope_path, double hop,
              double confidence_floor) {
    BeatGrid grid = [&] {
        if (!envelope_path.empty()) {
            const auto env = parse_envelope_csv(read_file(envelope_path), hop);
            return estimate_tempo(env.values, env.hop);
        }
        const auto contour = parse_contour_csv(read_file(contour_path), {}, hop);
        return estimate_tempo(envelope_from_contour(contour, confidence_floor), contour.hop());
    }();
    fmt::print("bpm={:.6f}\n", grid.bpm());
    return 0;
}

std::vector<std::pair<NoteSequence, NoteSequence>> read_corpus(const fs::path& corpus) {
    std::vector<std::pair<NoteSequence, NoteSequence>> pairs;
    const auto text = read_file(corpus);
    const auto base = corpus.parent_path();
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorKind::SchemaViolation,
                        fmt::format("{}:{}: expected 'ref<TAB>est'", corpus.string(), line_no));
        }
        const auto resolve = [&](std::string p) { return fs::path(p).is_relative() ? base / p : fs::path(p); };
        pairs.emplace_back(parse_notes_json(read_file(resolve(line.substr(0, tab)))),
                           parse_notes_json(read_file(resolve(line.substr(tab + 1)))));
    }
    return pairs;
}

int cmd_eval(const std::vector<std::string>& files, const std::string& corpus, const EvalConfig& config) {
    EvalReport report;
    if (!corpus.empty()) {
        if (!files.empty()) throw UsageError("give either REF EST or --corpus, not both");
        report = score_corpus(read_corpus(corpus), config);
    } else {
        if (files.size() != 2) throw UsageError("eval needs REF and EST paths (or --corpus)");
        report = score(parse_notes_json(read_file(files[0])), parse_notes_json(read_file(files[1])), config);
    }
    std::cout << write_report_json(report);
    return 0;
}

int cmd_export_midi(const std::string& notes_path, const std::string& out_path, double bpm) {
    const auto notes = parse_notes_json(read_file(notes_path));
    const fs::path out = out_path.empty() ? fs::path(notes_path).replace_extension(".mid") : fs::path(out_path);
    write_file_atomic(out, export_midi(notes, bpm));
    fmt::print("n_notes={} bpm={:.6f} out={}\n", notes.notes.size(), bpm, out.string());
    return 0;
}

struct SelfTrainFlags {
    std::string data;
    std::string runs_root = "runs";
    std::string run_id = "run";
    std::string pitch_predict;
    std::string pitch_model;
    std::string predict;
    std::string train;
    std::string augment;
    std::string mode = "NS";
    int iterations = 3;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::optional<double> bpm;
};

int cmd_selftrain(const SelfTrainFlags& f, const QuantFlags& quant, const EvalConfig& eval_config) {
    SelfTrainingPlan plan;
    const fs::path data_path(f.data);
    plan.data = parse_dataset_manifest(read_file(data_path), data_path.parent_path());
    plan.pitch_model = {f.pitch_predict, {}, f.pitch_model};
    plan.student_model = {f.predict, f.train, {}};
    plan.augmenter = {f.augment, !f.augment.empty()};
    plan.mode = parse_training_mode(f.mode);
    plan.iterations = f.iterations;
    plan.config = quant.build();
    plan.seed = f.seed;

    RunContext ctx;
    ctx.run_dir = fs::path(f.runs_root) / f.run_id;
    ctx.jobs = f.jobs;
    ctx.bpm_override = f.bpm;
    ctx.eval_config = eval_config;

    const auto chain = run_self_training(plan, ctx);
    for (const auto& m : chain) {
        std::string quality = "n/a";
        if (m.quality) {
            quality = fmt::format("COn={:.6f} COnP={:.6f} COnPOff={:.6f}", m.quality->at(MatchLevel::COn).f1,
                                  m.quality->at(MatchLevel::COnP).f1, m.quality->at(MatchLevel::COnPOff).f1);
        }
        fmt::print("iter{} teacher={} student={} quality: {}\n", m.iteration, m.teacher,
                   m.student_model.empty() ? "-" : m.student_model, quality);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vocal pitch-contour transcription toolkit"};
    app.require_subcommand(1);

    QuantFlags quant;
    EvalFlags eval_flags;

    auto* convert_cmd = app.add_subcommand("convert", "Convert a pitch contour CSV to notes JSON");
    std::string contour_path, out_path, envelope_path, track_id;
    std::optional<double> bpm;
    double hop = kDefaultHop;
    convert_cmd->add_option("contour", contour_path, "Contour CSV (time_sec,f0_hz,confidence)")->required();
    convert_cmd->add_option("-o,--out", out_path, "Output notes JSON (default: <contour>.notes.json)");
    auto* bpm_opt = convert_cmd->add_option("--bpm", bpm, "Tempo override, skips estimation");
    auto* env_opt = convert_cmd->add_option("--envelope", envelope_path, "Onset-strength CSV for tempo estimation");
    bpm_opt->excludes(env_opt);
    convert_cmd->add_option("--track-id", track_id, "Track id (default: file stem)");
    convert_cmd->add_option("--hop", hop, "Hop for single-row CSVs, seconds")->capture_default_str();
    quant.attach(convert_cmd);

    auto* tempo_cmd = app.add_subcommand("tempo", "Estimate a global tempo");
    std::string tempo_contour, tempo_envelope;
    double tempo_hop = kDefaultHop;
    double tempo_floor = 0.5;
    auto* tc = tempo_cmd->add_option("--contour", tempo_contour, "Contour CSV");
    auto* te = tempo_cmd->add_option("--envelope", tempo_envelope, "Onset-strength CSV");
    tc->excludes(te);
    tempo_cmd->add_option("--hop", tempo_hop, "Hop for single-row CSVs, seconds")->capture_default_str();
    tempo_cmd->add_option("--confidence-floor", tempo_floor, "Voicing confidence floor")->capture_default_str();

    auto* eval_cmd = app.add_subcommand("eval", "Score an estimate against a reference (COn/COnP/COnPOff)");
    std::vector<std::string> eval_files;
    std::string corpus;
    eval_cmd->add_option("files", eval_files, "REF EST notes JSON files");
    eval_cmd->add_option("--corpus", corpus, "TSV of 'ref<TAB>est' paths; scores are averaged per track");
    eval_flags.attach(eval_cmd);

    auto* midi_cmd = app.add_subcommand("export-midi", "Write notes JSON as a format-0 Standard MIDI File");
    std::string midi_notes, midi_out;
    double midi_bpm = 120.0;
    midi_cmd->add_option("notes", midi_notes, "Notes JSON")->required();
    midi_cmd->add_option("-o,--out", midi_out, "Output .mid (default: <notes>.mid)");
    midi_cmd->add_option("--bpm", midi_bpm, "Tempo written to the file")->capture_default_str();

    auto* st_cmd = app.add_subcommand("selftrain", "Run teacher-student self-training over external models");
    SelfTrainFlags st;
    st_cmd->add_option("--data", st.data, "Dataset manifest JSON")->required();
    st_cmd->add_option("--runs", st.runs_root, "Root directory for runs")->capture_default_str();
    st_cmd->add_option("--run-id", st.run_id, "Run name under --runs")->capture_default_str();
    st_cmd->add_option("--pitch-predict", st.pitch_predict,
                       "Pitch estimator template: {input_list} {output_dir} [{model}]");
    st_cmd->add_option("--pitch-model", st.pitch_model, "Pitch estimator artifact, substituted for {model}");
    st_cmd->add_option("--predict", st.predict, "Student predict template: {input_list} {output_dir} [{model}]")
        ->required();
    st_cmd->add_option("--train", st.train, "Student train template: {label_manifest} {output_model} {seed}")
        ->required();
    st_cmd->add_option("--augment", st.augment, "Augmenter template: {input_audio} {output_audio} {seed}");
    st_cmd->add_option("--mode", st.mode, "TS or NS")->check(CLI::IsMember({"TS", "NS"}))->capture_default_str();
    st_cmd->add_option("--iterations", st.iterations, "Self-training iterations")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    st_cmd->add_option("--seed", st.seed, "Global seed")->capture_default_str();
    st_cmd->add_option("--jobs", st.jobs, "Parallel per-track commands")->check(CLI::PositiveNumber)->capture_default_str();
    st_cmd->add_option("--bpm", st.bpm, "Tempo for tracks without a manifest bpm");
    QuantFlags st_quant;
    st_quant.attach(st_cmd);
    EvalFlags st_eval;
    st_eval.attach(st_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*convert_cmd) {
            return cmd_convert(contour_path, out_path, bpm, envelope_path, track_id, hop, quant);
        }
        if (*tempo_cmd) {
            if (tempo_contour.empty() && tempo_envelope.empty()) throw UsageError("tempo needs --contour or --envelope");
            return cmd_tempo(tempo_contour, tempo_envelope, tempo_hop, tempo_floor);
        }
        if (*eval_cmd) return cmd_eval(eval_files, corpus, eval_flags.config);
        if (*midi_cmd) return cmd_export_midi(midi_notes, midi_out, midi_bpm);
        if (*st_cmd) return cmd_selftrain(st, st_quant, st_eval.config);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}
