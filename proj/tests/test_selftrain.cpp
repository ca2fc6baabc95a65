#include "fixture.h"

#include "vocalnote/error.h"
#include "vocalnote/process.h"
#include "vocalnote/selftrain.h"

#include <doctest.h>

#include <atomic>

using namespace vocalnote;

namespace {

const std::string kStub = STUB_MODEL_PATH;

SelfTrainingPlan plan_for(const DatasetManifest& data, const fixture::StubCommands& c, TrainingMode mode, int iterations) {
    SelfTrainingPlan plan;
    plan.data = data;
    plan.pitch_model = c.pitch;
    plan.student_model = c.student;
    plan.augmenter = c.augmenter;
    plan.mode = mode;
    plan.iterations = iterations;
    plan.seed = 7;
    return plan;
}

} // namespace

TEST_CASE("shell quoting and template expansion") {
    CHECK(shell_quote("a b") == "'a b'");
    CHECK(shell_quote("it's") == "'it'\\''s'");
    CHECK(expand_template("run {x} {y} {z}", {{"x", "1"}, {"y", "two words"}}) == "run '1' 'two words' {z}");
    CHECK(count_placeholder("{a} {a} {b}", "a") == 2);
}

TEST_CASE("template validation") {
    ExternalModelSpec spec{"predict {input_list}", "train {label_manifest} {output_model} {seed}", ""};
    CHECK_THROWS_AS(validate_predict_template(spec), Error);
    spec.predict_command = "predict {input_list} {output_dir} {output_dir}";
    CHECK_THROWS_AS(validate_predict_template(spec), Error);
    spec.predict_command = "predict {input_list} {output_dir} {model}";
    CHECK_NOTHROW(validate_predict_template(spec));
    CHECK_NOTHROW(validate_train_template(spec));
    spec.train_command = "train {label_manifest} {output_model}";
    CHECK_THROWS_AS(validate_train_template(spec), Error);
    CHECK_THROWS_AS(validate_augmenter({"augment {input_audio} {output_audio}", true}), Error);
    CHECK_NOTHROW(validate_augmenter({"anything", false}));
}

TEST_CASE("dataset manifest parsing") {
    const auto data = parse_dataset_manifest(
        R"({"role": "labeled", "entries": [{"track_id": "a", "contour_path": "c/a.csv", "bpm": 90},
                                            {"track_id": "b", "audio_path": "/abs/b.wav"}]})",
        "/data");
    CHECK(data.role == DatasetRole::Labeled);
    REQUIRE(data.entries.size() == 2);
    CHECK(*data.entries[0].contour_path == fs::path("/data/c/a.csv"));
    CHECK(*data.entries[0].bpm == 90.0);
    CHECK(*data.entries[1].audio_path == fs::path("/abs/b.wav"));
    CHECK_FALSE(data.entries[1].bpm);
    CHECK_THROWS_AS(parse_dataset_manifest(R"({"entries": [{"track_id": "a"}, {"track_id": "a"}]})"), Error);
    CHECK_THROWS_AS(parse_dataset_manifest(R"({"entries": [{"track_id": "../x"}]})"), Error);
}

TEST_CASE("parallel_for visits each index once") {
    std::vector<std::atomic<int>> seen(97);
    parallel_for(seen.size(), 4, [&](std::size_t i) { seen[i]++; });
    for (const auto& s : seen) CHECK(s.load() == 1);
    CHECK_THROWS(parallel_for(10, 3, [](std::size_t i) {
        if (i == 5) throw Error(ErrorKind::CommandFailed, "boom");
    }));
}

TEST_CASE("precomputed contours need no commands") {
    fixture::TempDir tmp;
    const auto data = fixture::blip_corpus(tmp.path(), 2, true);
    const auto log = tmp.path() / "calls.log";
    const auto c = fixture::stub_commands(kStub, log);
    const RunContext ctx = fixture::context(tmp.path() / "run");
    const auto m = generate_initial_labels(data, c.pitch, {}, ctx);
    CHECK(fixture::count_lines(log) == 0);
    CHECK(m.iteration == 0);
    CHECK(m.teacher == kInitialTeacher);
    REQUIRE(m.tracks.size() == 2);
    for (const auto& t : m.tracks) {
        const auto notes = parse_notes_json(read_file(ctx.run_dir / t.labels));
        CHECK(notes.notes.size() == 4);
        CHECK(t.bpm == 120.0);
    }
    CHECK(fs::exists(manifest_path(ctx, 0)));
    CHECK(parse_iteration_manifest(read_file(manifest_path(ctx, 0))).fingerprint == m.fingerprint);
}

TEST_CASE("malformed predicted contour names the track") {
    fixture::TempDir tmp;
    const auto data = fixture::blip_corpus(tmp.path(), 2, false);
    ExternalModelSpec bad{shell_quote(kStub) + " predict-bad {input_list} {output_dir}", "", ""};
    const RunContext ctx = fixture::context(tmp.path() / "run");
    CHECK_THROWS_WITH_AS(generate_initial_labels(data, bad, {}, ctx),
                         doctest::Contains("SchemaViolation: track track0"), Error);
}

TEST_CASE("constant 440 Hz prediction labels a single A4") {
    fixture::TempDir tmp;
    auto data = fixture::blip_corpus(tmp.path(), 1, false);
    data.entries[0].gold_notes_path.reset();
    ExternalModelSpec constant{shell_quote(kStub) + " predict-const {input_list} {output_dir} 440 2.0", "", ""};
    const RunContext ctx = fixture::context(tmp.path() / "run");
    const auto m = generate_initial_labels(data, constant, {}, ctx);
    const auto notes = parse_notes_json(read_file(ctx.run_dir / m.tracks[0].labels));
    REQUIRE(notes.notes.size() == 1);
    CHECK(notes.notes[0].pitch == 69);
    CHECK(notes.notes[0].offset == doctest::Approx(2.0));
    CHECK_FALSE(m.quality);
}

TEST_CASE("bpm falls back when the contour carries no usable tempo") {
    fixture::TempDir tmp;
    auto data = fixture::blip_corpus(tmp.path(), 1, false);
    data.entries[0].bpm.reset();
    ExternalModelSpec constant{shell_quote(kStub) + " predict-const {input_list} {output_dir} 440 5.0", "", ""};
    RunContext ctx = fixture::context(tmp.path() / "run");
    CHECK(generate_initial_labels(data, constant, {}, ctx).tracks[0].bpm == 120.0);
    ctx.run_dir = tmp.path() / "run-override";
    ctx.bpm_override = 90.0;
    CHECK(generate_initial_labels(data, constant, {}, ctx).tracks[0].bpm == 90.0);
}

TEST_CASE("NS mode requires an enabled augmenter") {
    fixture::TempDir tmp;
    const auto data = fixture::blip_corpus(tmp.path(), 1, true);
    auto c = fixture::stub_commands(kStub, tmp.path() / "calls.log");
    c.augmenter.enabled = false;
    const RunContext ctx = fixture::context(tmp.path() / "run");
    CHECK_THROWS_WITH_AS(run_self_training(plan_for(data, c, TrainingMode::NS, 1), ctx),
                         doctest::Contains("AugmenterRequired"), Error);
    const auto m0 = generate_initial_labels(data, c.pitch, {}, ctx);
    CHECK_THROWS_WITH_AS(run_iteration(1, m0, data, c.student, c.augmenter, TrainingMode::NS, {}, 1, ctx),
                         doctest::Contains("AugmenterRequired"), Error);
    CHECK_NOTHROW(run_iteration(1, m0, data, c.student, c.augmenter, TrainingMode::TS, {}, 1, ctx));
}

TEST_CASE("three-iteration NS chain is linked, seeded, and resumable") {
    fixture::TempDir tmp;
    const auto data = fixture::blip_corpus(tmp.path(), 3, true);
    const auto log = tmp.path() / "calls.log";
    const auto c = fixture::stub_commands(kStub, log);
    RunContext ctx = fixture::context(tmp.path() / "run");
    ctx.jobs = 2;
    const auto plan = plan_for(data, c, TrainingMode::NS, 3);
    const auto chain = run_self_training(plan, ctx);
    REQUIRE(chain.size() == 4);
    CHECK(chain[0].teacher == kInitialTeacher);
    for (int k = 1; k <= 3; ++k) {
        const auto& m = chain[static_cast<std::size_t>(k)];
        CHECK(m.iteration == k);
        CHECK(m.mode == "NS");
        CHECK(m.teacher == (k == 1 ? std::string(kInitialTeacher) : chain[static_cast<std::size_t>(k) - 1].student_model));
        CHECK(m.rng_seed == iteration_seed(7, k));
        CHECK(fs::exists(ctx.run_dir / m.student_model));
        CHECK(m.label_pipeline == kLabelPipeline);
        REQUIRE(m.quality);
        for (const auto& t : m.tracks) {
            CHECK(fs::exists(ctx.run_dir / ("iter" + std::to_string(k)) / "augmented" / (t.track_id + ".csv")));
        }
    }
    CHECK(chain[1].rng_seed != chain[2].rng_seed);
    const auto calls = fixture::count_lines(log);
    // 3 augment + 1 train + 1 eval predict per iteration, plus a teacher predict from k = 2.
    CHECK(calls == 3 * 5 + 2);

    const auto before = fixture::snapshot(ctx.run_dir);
    const auto again = run_self_training(plan, ctx);
    CHECK(fixture::count_lines(log) == calls);
    CHECK(fixture::snapshot(ctx.run_dir) == before);
    for (std::size_t k = 0; k < chain.size(); ++k) {
        CHECK(write_iteration_manifest(again[k]) == write_iteration_manifest(chain[k]));
    }
    CHECK(fs::exists(ctx.run_dir / "quality_curve.json"));

    SUBCASE("modified outputs invalidate downstream iterations") {
        write_file_atomic(ctx.run_dir / chain[1].student_model, "tampered\n");
        CHECK_THROWS_WITH_AS(run_iteration(2, chain[1], data, c.student, c.augmenter, TrainingMode::NS, {},
                                           iteration_seed(7, 2), ctx),
                             doctest::Contains("StaleManifest"), Error);
        CHECK_THROWS_WITH_AS(run_iteration(3, chain[1], data, c.student, c.augmenter, TrainingMode::NS, {},
                                           iteration_seed(7, 3), ctx),
                             doctest::Contains("StaleManifest"), Error);
        // A full rerun rebuilds iteration 1 and everything after it.
        const auto rebuilt = run_self_training(plan, ctx);
        CHECK(fixture::count_lines(log) > calls);
        CHECK(write_iteration_manifest(rebuilt[3]) == write_iteration_manifest(chain[3]));
    }
}

TEST_CASE("TS mode with an identity student keeps labels fixed") {
    fixture::TempDir tmp;
    const auto data = fixture::blip_corpus(tmp.path(), 2, true);
    const auto c = fixture::stub_commands(kStub, tmp.path() / "calls.log");
    const RunContext ctx = fixture::context(tmp.path() / "run");
    const auto chain = run_self_training(plan_for(data, c, TrainingMode::TS, 3), ctx);
    for (std::size_t k = 1; k < chain.size(); ++k) {
        for (std::size_t t = 0; t < chain[k].tracks.size(); ++t) {
            CHECK(read_file(ctx.run_dir / chain[k].tracks[t].labels) == read_file(ctx.run_dir / chain[0].tracks[t].labels));
        }
        CHECK_FALSE(fs::exists(ctx.run_dir / ("iter" + std::to_string(k)) / "augmented"));
    }
}

TEST_CASE("filtered labels beat the raw contour and the student keeps up") {
    fixture::TempDir tmp;
    const auto data = fixture::blip_corpus(tmp.path(), 3, true);
    const auto c = fixture::stub_commands(kStub, tmp.path() / "calls.log");
    const RunContext ctx = fixture::context(tmp.path() / "run");
    const auto chain = run_self_training(plan_for(data, c, TrainingMode::NS, 1), ctx);
    REQUIRE(chain[0].quality);
    REQUIRE(chain[0].raw_quality);
    REQUIRE(chain[1].quality);
    CHECK(chain[0].quality->at(MatchLevel::COnP).f1 > chain[0].raw_quality->at(MatchLevel::COnP).f1);
    CHECK(chain[0].quality->at(MatchLevel::COnPOff).f1 == 1.0);
    for (auto level : kAllLevels) CHECK(chain[1].quality->at(level).f1 >= chain[0].quality->at(level).f1);
}

TEST_CASE("failing commands surface as CommandFailed") {
    fixture::TempDir tmp;
    const auto data = fixture::blip_corpus(tmp.path(), 1, false);
    ExternalModelSpec failing{shell_quote(kStub) + " fail {input_list} {output_dir}", "", ""};
    const RunContext ctx = fixture::context(tmp.path() / "run");
    CHECK_THROWS_WITH_AS(generate_initial_labels(data, failing, {}, ctx), doctest::Contains("CommandFailed"), Error);

    const auto c = fixture::stub_commands(kStub, tmp.path() / "calls.log");
    const auto good = fixture::blip_corpus(tmp.path(), 1, true);
    const auto m0 = generate_initial_labels(good, c.pitch, {}, ctx);
    auto bad_train = c.student;
    bad_train.train_command = shell_quote(kStub) + " fail {label_manifest} {output_model} {seed}";
    CHECK_THROWS_WITH_AS(run_iteration(1, m0, good, bad_train, c.augmenter, TrainingMode::TS, {}, 1, ctx),
                         doctest::Contains("CommandFailed"), Error);
}

TEST_CASE("iteration manifest JSON round trip") {
    IterationManifest m;
    m.iteration = 2;
    m.mode = "TS";
    m.teacher = "iter1/student.model";
    m.pseudo_label_dir = "iter2/labels";
    m.student_model = "iter2/student.model";
    m.rng_seed = 12345;
    m.fingerprint = "abc";
    m.tracks = {{"a", 120.0, "iter2/labels/a.notes.json"}};
    m.commands = {"echo hi"};
    m.output_hashes = {{"iter2/student.model", "ff"}};
    const auto text = write_iteration_manifest(m);
    CHECK(write_iteration_manifest(parse_iteration_manifest(text)) == text);
    CHECK_THROWS_AS(parse_iteration_manifest("{}"), Error);
}
