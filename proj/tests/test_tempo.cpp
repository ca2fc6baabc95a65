#include "oracles.h"

#include "vocalnote/error.h"
#include "vocalnote/tempo.h"

#include <doctest.h>

#include <random>

using namespace vocalnote;

TEST_CASE("filter windows at 120 bpm, 10 ms hop") {
    // 0.5 s beat: 1/32 -> 1.5625 frames, 1/16 -> 3.125, 1/12 -> 4.1667.
    const BeatGrid grid(120.0, 0.010);
    CHECK(oracle::nearest_odd_by_scan(0.5 / 32 / 0.01) == 1);
    CHECK(oracle::nearest_odd_by_scan(0.5 / 16 / 0.01) == 3);
    CHECK(oracle::nearest_odd_by_scan(0.5 / 12 / 0.01) == 5);
    CHECK(frames_for_beat_fraction(grid, {1, 32}) == 1);
    CHECK(frames_for_beat_fraction(grid, {1, 16}) == 3);
    CHECK(frames_for_beat_fraction(grid, {1, 12}) == 5);
}

TEST_CASE("ties round up to the larger odd window") {
    // beat 0.5 s, 1/25 beat = 0.02 s = exactly 2 frames at 10 ms.
    CHECK(frames_for_beat_fraction(BeatGrid(120.0, 0.01), {1, 25}) == 3);
    // exactly 4 frames -> 5
    CHECK(frames_for_beat_fraction(BeatGrid(120.0, 0.01), {2, 25}) == 5);
}

TEST_CASE("window matches brute-force scan, is odd, and is monotone") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> bpm(30.0, 300.0), hop(0.001, 0.05);
    const std::vector<BeatFraction> fractions{{1, 32}, {1, 16}, {1, 12}, {1, 8}, {1, 4}};
    for (int i = 0; i < 500; ++i) {
        const BeatGrid grid(bpm(rng), hop(rng));
        int prev = 0;
        for (const auto& f : fractions) {
            const int w = frames_for_beat_fraction(grid, f);
            CHECK(w == oracle::nearest_odd_by_scan(grid.beat_seconds() * f.value() / grid.hop()));
            CHECK(w % 2 == 1);
            CHECK(w >= prev);
            prev = w;
        }
        const BeatGrid faster(std::min(300.0, grid.bpm() * 1.5), grid.hop());
        CHECK(frames_for_beat_fraction(faster, {1, 12}) <= frames_for_beat_fraction(grid, {1, 12}));
    }
}

TEST_CASE("grid and fraction validation") {
    CHECK_THROWS_AS(BeatGrid(29.0, 0.01), Error);
    CHECK_THROWS_AS(BeatGrid(301.0, 0.01), Error);
    CHECK_THROWS_AS(BeatGrid(120.0, 0.0), Error);
    CHECK(parse_beat_fraction("1/16") == BeatFraction{1, 16});
    CHECK(parse_beat_fraction("2") == BeatFraction{2, 1});
    CHECK_THROWS_AS(parse_beat_fraction("0/3"), Error);
    CHECK_THROWS_AS(parse_beat_fraction("1/x"), Error);
}

TEST_CASE("impulse trains recover their tempo") {
    const double hop = 0.01;
    for (const auto& [period, bpm] : std::vector<std::pair<double, double>>{{0.5, 120.0}, {1.0, 60.0}, {0.6, 100.0}}) {
        const auto env = oracle::impulse_train(period, hop, 10.0);
        // The raw autocorrelation peak within one period sits at the period.
        const auto period_frames = static_cast<std::size_t>(std::llround(period / hop));
        CHECK(oracle::autocorrelation_peak(env, 20, period_frames + period_frames / 2) == period_frames);
        CHECK(estimate_tempo(env, hop).bpm() == doctest::Approx(bpm).epsilon(1.0 / bpm));
    }
}

TEST_CASE("estimator preconditions") {
    CHECK_THROWS_WITH_AS(estimate_tempo(std::vector<double>(1000, 0.0), 0.01), doctest::Contains("DegenerateEnvelope"), Error);
    CHECK_THROWS_WITH_AS(estimate_tempo(std::vector<double>(100, 1.0), 0.01), doctest::Contains("EnvelopeTooShort"), Error);
    std::vector<double> negative(1000, 0.0);
    negative[3] = -1.0;
    CHECK_THROWS_AS(estimate_tempo(negative, 0.01), Error);
}

TEST_CASE("estimator ignores positive scaling") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> env(1200);
    for (std::size_t t = 0; t < env.size(); ++t) env[t] = (t % 43 == 0 ? 2.0 : 0.0) + 0.3 * u(rng);
    const double base = estimate_tempo(env, 0.01).bpm();
    for (double scale : {1e-3, 0.5, 7.0, 1e4}) {
        std::vector<double> scaled(env);
        for (auto& v : scaled) v *= scale;
        CHECK(estimate_tempo(scaled, 0.01).bpm() == base);
    }
}

TEST_CASE("envelope from contour") {
    SUBCASE("constant voiced contour") {
        const PitchContour c(0.01, std::vector<PitchFrame>(50, {440.0, 0.9}));
        const auto env = envelope_from_contour(c);
        for (double v : env) CHECK(v == 0.0);
    }
    SUBCASE("single onset") {
        std::vector<PitchFrame> frames(50, {440.0, 0.9});
        for (int i = 0; i < 10; ++i) frames[i] = {0.0, 0.0};
        const auto env = envelope_from_contour(PitchContour(0.01, frames));
        int nonzero = 0;
        for (double v : env) nonzero += v != 0.0;
        CHECK(nonzero == 1);
        CHECK(env[10] == 1.0);
    }
    SUBCASE("two-semitone step") {
        std::vector<PitchFrame> frames(50, {440.0, 0.9});
        for (int i = 25; i < 50; ++i) frames[i] = {493.883, 0.9};
        const auto env = envelope_from_contour(PitchContour(0.01, frames));
        CHECK(env[0] == 0.0);
        CHECK(env[25] >= 2.0);
    }
}
