#include "potminer/codebook.hpp"
#include "potminer/partition.hpp"
#include "potminer/rng.hpp"
#include "potminer/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace potminer;

namespace {

FrameMotionStats stats_with_sigma(std::vector<double> sigma) {
    FrameMotionStats s;
    s.sigma = std::move(sigma);
    s.median_present.assign(s.sigma.size(), 1);
    s.median_velocity.assign(s.sigma.size(), Vec2{});
    return s;
}

Shot shot_with_frames(int n) {
    Shot s;
    s.num_frames = n;
    return s;
}

// histogram sequence with one active codeword following `values`
FrameCodewordSequence seq_of(std::vector<double> values, int codeword = 0) {
    FrameCodewordSequence seq;
    seq.length = static_cast<int>(values.size());
    seq.series[codeword] = std::move(values);
    return seq;
}

}  // namespace

TEST_CASE("detect_pauses: no pause when sigma stays high") {
    const auto stats = stats_with_sigma(std::vector<double>(29, 0.5));
    const auto split = detect_pauses(shot_with_frames(30), stats, 0.1);
    CHECK(split.pauses.empty());
    REQUIRE(split.intervals.size() == 1);
    CHECK(split.intervals[0] == std::pair<int, int>{0, 30});
}

TEST_CASE("detect_pauses: low sigma on frames 10-14 splits the shot") {
    std::vector<double> sigma(29, 0.5);
    for (int k = 10; k <= 14; ++k) sigma[static_cast<std::size_t>(k)] = 0.01;
    const auto split = detect_pauses(shot_with_frames(30), stats_with_sigma(sigma), 0.1);
    REQUIRE(split.pauses.size() == 1);
    CHECK(split.pauses[0] == std::pair<int, int>{10, 15});
    REQUIRE(split.intervals.size() == 2);
    CHECK(split.intervals[0] == std::pair<int, int>{0, 10});
    CHECK(split.intervals[1] == std::pair<int, int>{15, 30});
}

TEST_CASE("detect_pauses: two-frame lulls never split") {
    std::vector<double> sigma(29, 0.5);
    sigma[5] = sigma[6] = 0.0;
    const auto split = detect_pauses(shot_with_frames(30), stats_with_sigma(sigma), 0.1);
    CHECK(split.pauses.empty());
    REQUIRE(split.intervals.size() == 1);
}

TEST_CASE("detect_pauses: a run reaching the final transition takes the last frame") {
    std::vector<double> sigma(29, 0.5);
    for (int k = 25; k <= 28; ++k) sigma[static_cast<std::size_t>(k)] = 0.0;
    const auto split = detect_pauses(shot_with_frames(30), stats_with_sigma(sigma), 0.1);
    REQUIRE(split.pauses.size() == 1);
    CHECK(split.pauses[0] == std::pair<int, int>{25, 30});
    CHECK(split.intervals.back() == std::pair<int, int>{0, 25});
}

TEST_CASE("framewise codeword sequence") {
    SUBCASE("no PoTs -> all-zero sequence") {
        const auto seq = framewise_codeword_sequence(0, 10, {}, {}, 4);
        CHECK(seq.length == 10);
        CHECK(seq.series.empty());
    }
    SUBCASE("one PoT of codeword 2 per frame -> constant unit weight") {
        std::vector<PoTRecord> pots;
        std::vector<int> cws;
        for (int f = 0; f < 10; ++f) {
            PoTRecord p;
            p.start_frame = f;
            pots.push_back(p);
            cws.push_back(2);
        }
        const auto seq = framewise_codeword_sequence(0, 10, pots, cws, 4);
        REQUIRE(seq.series.count(2) == 1);
        for (double w : seq.series.at(2)) {
            CHECK(w == 1.0);
        }
    }
    SUBCASE("alternating codewords 0/1") {
        std::vector<PoTRecord> pots;
        std::vector<int> cws;
        for (int f = 0; f < 8; ++f) {
            PoTRecord p;
            p.start_frame = f;
            pots.push_back(p);
            cws.push_back(f % 2);
        }
        const auto seq = framewise_codeword_sequence(0, 8, pots, cws, 2);
        for (int f = 0; f < 8; ++f) {
            CHECK(seq.series.at(0)[static_cast<std::size_t>(f)] == (f % 2 == 0 ? 1.0 : 0.0));
            CHECK(seq.series.at(1)[static_cast<std::size_t>(f)] == (f % 2 == 1 ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("window spectrum matches the closed form for a sampled sinusoid") {
    const int len = 40;
    const int cycles = 4;  // period 10
    const double amp = 0.5;
    std::vector<double> y;
    for (int t = 0; t < len; ++t) {
        y.push_back(0.5 + amp * std::sin(2.0 * 3.14159265358979323846 * cycles * t / len));
    }
    const auto spec = window_spectrum(seq_of(std::move(y)), 0, len);
    // DFT of a pure integer-cycle sinusoid: |Y_j0| = |Y_{len-j0}| = amp*len/2,
    // zero elsewhere, so each mirror bin holds half the magnitude.
    CHECK(spec.total_magnitude == doctest::Approx(2.0 * amp * len / 2.0).epsilon(1e-9));
    CHECK(spec.normalized[cycles - 1] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(spec.normalized[(len - cycles) - 1] == doctest::Approx(0.5).epsilon(1e-9));
    double elsewhere = 0.0;
    for (int j = 1; j < len; ++j) {
        if (j != cycles && j != len - cycles) {
            elsewhere += spec.normalized[static_cast<std::size_t>(j - 1)];
        }
    }
    CHECK(elsewhere == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("detector: constant sequences have no peak") {
    PeriodicityConfig cfg;
    const auto det = detect_periodic_interval(seq_of(std::vector<double>(60, 0.7)), cfg);
    CHECK_FALSE(det.has_value());
}

TEST_CASE("detector: sequence shorter than min_period*min_cycles yields none") {
    PeriodicityConfig cfg;
    std::vector<double> y;
    for (int t = 0; t < 14; ++t) y.push_back(t % 2 ? 1.0 : 0.0);
    CHECK_FALSE(detect_periodic_interval(seq_of(std::move(y)), cfg).has_value());
}

TEST_CASE("detector: sinusoid of period 10 over 40 frames") {
    std::vector<double> a, b;
    for (int t = 0; t < 40; ++t) {
        const double v = 0.5 + 0.5 * std::sin(2.0 * 3.14159265358979323846 * t / 10.0);
        a.push_back(v);
        b.push_back(1.0 - v);  // complementary codeword, same period
    }
    FrameCodewordSequence seq;
    seq.length = 40;
    seq.series[3] = a;
    seq.series[7] = b;
    PeriodicityConfig cfg;
    const auto det = detect_periodic_interval(seq, cfg);
    REQUIRE(det.has_value());
    CHECK(det->period == doctest::Approx(10.0).epsilon(0.1));
    CHECK(det->peak > 0.3);
    CHECK(det->end - det->start >= 30);

    // Uniform scaling of all weights changes nothing (energy normalization).
    FrameCodewordSequence scaled = seq;
    for (auto& [cw, series] : scaled.series) {
        for (double& v : series) v *= 5.0;
    }
    const auto det2 = detect_periodic_interval(scaled, cfg);
    REQUIRE(det2.has_value());
    CHECK(det2->start == det->start);
    CHECK(det2->end == det->end);
    CHECK(det2->peak == doctest::Approx(det->peak).epsilon(1e-9));

    // Serial variant agrees exactly.
    const auto det3 = detect_periodic_interval_serial(seq, cfg);
    REQUIRE(det3.has_value());
    CHECK(det3->start == det->start);
    CHECK(det3->end == det->end);
    CHECK(det3->peak == det->peak);
}

TEST_CASE("detector: embedded periodic segment is localized") {
    // 30 quiet frames, 60 periodic frames (period 12), 30 quiet frames.
    Rng rng(77);
    std::vector<double> y(120, 0.0);
    for (int t = 30; t < 90; ++t) {
        y[static_cast<std::size_t>(t)] =
            0.5 + 0.5 * std::sin(2.0 * 3.14159265358979323846 * (t - 30) / 12.0) +
            rng.next_uniform(-0.05, 0.05);
    }
    for (int t = 0; t < 120; ++t) {
        if (t < 30 || t >= 90) {
            y[static_cast<std::size_t>(t)] = rng.next_uniform(0.0, 0.08);
        }
    }
    PeriodicityConfig cfg;
    const auto det = detect_periodic_interval(seq_of(std::move(y)), cfg);
    REQUIRE(det.has_value());
    CHECK(det->period == doctest::Approx(12.0).epsilon(0.1));
    CHECK(det->start >= 27);
    CHECK(det->start <= 33);
    CHECK(det->end >= 87);
    CHECK(det->end <= 93);
}

namespace {

struct QuantizedShot {
    synth::SynthShot synth_shot;
    FrameMotionStats stats;
    std::vector<PoTRecord> pots;
    std::vector<int> codewords;
    Codebook cb;
};

QuantizedShot quantized_pipeline(const synth::BehaviorScript& script, std::uint64_t seed) {
    QuantizedShot q;
    q.synth_shot = synth::generate_shot(script, seed);
    SelectionConfig sel;
    q.stats = compute_frame_motion_stats(q.synth_shot.shot, sel.n);
    q.pots = extract_pots(q.synth_shot.shot, q.stats, sel);
    DescriptorMatrix m;
    for (const auto& p : q.pots) {
        m.push(p.descriptor.flatten());
    }
    KMeansOptions km;
    km.k = 40;
    km.restarts = 2;
    km.seed = 5;
    q.cb = build_codebook(m, km);
    q.codewords = quantize_all(m, q.cb);
    return q;
}

}  // namespace

TEST_CASE("partition: pure walking becomes one periodic interval") {
    synth::BehaviorScript script;
    auto walk = synth::default_segment("walk");
    walk.duration = 80;
    script.segments = {walk};
    const auto q = quantized_pipeline(script, 31);

    PartitionConfig cfg;
    const auto intervals = partition_shot(q.synth_shot.shot, q.stats, q.pots, q.codewords, q.cb.k, cfg);
    REQUIRE(!intervals.empty());
    // The dominant interval is periodic with the gait period and covers
    // nearly the whole shot. PoTs only start up to frame N-n-1, so the
    // coverable span is what "whole" can mean here.
    const Interval* largest = &intervals[0];
    for (const auto& iv : intervals) {
        if (iv.length() > largest->length()) largest = &iv;
    }
    const int coverable = q.synth_shot.shot.num_frames - 10;
    CHECK(largest->origin == Interval::Origin::periodic);
    CHECK(largest->length() >= (3 * coverable) / 4);
    CHECK(largest->period == doctest::Approx(8.0).epsilon(0.15));
}

TEST_CASE("partition: walk, still gap, turn-head") {
    synth::BehaviorScript script;
    auto walk = synth::default_segment("walk");
    walk.duration = 48;
    auto still = synth::default_segment("still");
    still.duration = 6;
    auto turn = synth::default_segment("turn-head");
    turn.duration = 24;
    script.segments = {walk, still, turn};
    const auto q = quantized_pipeline(script, 13);

    PartitionConfig cfg;
    const auto intervals = partition_shot(q.synth_shot.shot, q.stats, q.pots, q.codewords, q.cb.k, cfg);

    // The pause splits the shot; the walking side carries a periodic
    // interval, the turn-head side stays unsplit (aperiodic).
    REQUIRE(intervals.size() >= 2);
    bool has_periodic_walk = false;
    for (const auto& iv : intervals) {
        if (iv.origin == Interval::Origin::periodic && iv.end_frame <= 50) {
            has_periodic_walk = true;
            CHECK(iv.period == doctest::Approx(8.0).epsilon(0.2));
        }
        // nothing crosses the pause [48, 54)
        CHECK((iv.end_frame <= 48 || iv.start_frame >= 54));
    }
    CHECK(has_periodic_walk);

    // Tiling: intervals plus the pause cover [0, num_frames) disjointly.
    const auto split = detect_pauses(q.synth_shot.shot, q.stats, cfg.theta_f);
    std::vector<std::pair<int, int>> ranges;
    for (const auto& iv : intervals) ranges.emplace_back(iv.start_frame, iv.end_frame);
    for (const auto& p : split.pauses) ranges.push_back(p);
    std::sort(ranges.begin(), ranges.end());
    int cursor = 0;
    for (const auto& [s, e] : ranges) {
        CHECK(s == cursor);
        cursor = e;
    }
    CHECK(cursor == q.synth_shot.shot.num_frames);
}

TEST_CASE("partition: zero PoTs means a single whole-shot interval") {
    Shot shot;
    shot.num_frames = 40;
    FrameMotionStats stats = stats_with_sigma(std::vector<double>(39, 0.5));
    PartitionConfig cfg;
    const auto intervals = partition_shot(shot, stats, {}, {}, 8, cfg);
    REQUIRE(intervals.size() == 1);
    CHECK(intervals[0].start_frame == 0);
    CHECK(intervals[0].end_frame == 40);
    CHECK(intervals[0].origin == Interval::Origin::whole_shot);
}

TEST_CASE("partition: re-running on an emitted periodic interval keeps it intact") {
    synth::BehaviorScript script;
    auto walk = synth::default_segment("walk");
    walk.duration = 64;
    script.segments = {walk};
    const auto q = quantized_pipeline(script, 41);
    PartitionConfig cfg;
    const auto intervals = partition_shot(q.synth_shot.shot, q.stats, q.pots, q.codewords, q.cb.k, cfg);
    for (const auto& iv : intervals) {
        if (iv.origin != Interval::Origin::periodic) {
            continue;
        }
        const auto seq = framewise_codeword_sequence(iv.start_frame, iv.end_frame, q.pots,
                                                     q.codewords, q.cb.k);
        const auto det = detect_periodic_interval(seq, cfg.periodicity);
        REQUIRE(det.has_value());
        // The re-detected core reaches both ends up to the merge slack.
        CHECK(det->start < cfg.min_remainder);
        CHECK(seq.length - det->end < cfg.min_remainder);
    }
}

TEST_CASE("interval file round trip") {
    std::vector<Interval> ivs;
    Interval a;
    a.shot_id = 2;
    a.start_frame = 0;
    a.end_frame = 50;
    a.origin = Interval::Origin::periodic;
    a.period = 8.25;
    Interval b;
    b.shot_id = 2;
    b.start_frame = 55;
    b.end_frame = 80;
    b.origin = Interval::Origin::remainder;
    ivs = {a, b};
    const std::string path = "/tmp/potminer_test.intervals";
    save_intervals(ivs, path);
    const auto back = load_intervals(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].shot_id == 2);
    CHECK(back[0].end_frame == 50);
    CHECK(back[0].origin == Interval::Origin::periodic);
    CHECK(back[0].period == 8.25);
    CHECK(back[1].origin == Interval::Origin::remainder);
}
