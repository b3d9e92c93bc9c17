#include "potminer/synth.hpp"

#include "potminer/dataset_io.hpp"
#include "potminer/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace potminer::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Side-view skeleton, image coordinates (y grows downward). Leg points
// oscillate horizontally, the head chain bobs vertically; per-point
// amplitude fractions keep the anchor/swing ordering decidable from
// construction (torso < any limb, limb spread < torso-to-limb gap).
struct SkeletonPoint {
    Vec2 rest;          // offset from root, base scale
    Vec2 attach;        // rotation center for turn-head / stretch
    PartTag part;
    double amp_scale;   // fraction of segment amplitude
    double phase;       // oscillation phase (walk/run)
    Vec2 osc_dir;       // oscillation direction
    bool head_chain;    // rotates during turn-head
    bool front_leg;     // rotates during stretch
};

const std::vector<SkeletonPoint>& skeleton() {
    static const std::vector<SkeletonPoint> pts = [] {
        std::vector<SkeletonPoint> v;
        const Vec2 right{1.0, 0.0};
        const Vec2 down{0.0, 1.0};
        // torso
        for (double x : {0.0, 15.0, 30.0}) {
            v.push_back({{x, 0.0}, {x, 0.0}, PartTag::torso, 0.0, 0.0, right, false, false});
        }
        // neck + head, attached at the shoulder (30, 0)
        const Vec2 shoulder{30.0, 0.0};
        for (Vec2 off : {Vec2{4.0, -8.0}, Vec2{8.0, -16.0}, Vec2{14.0, -18.0}}) {
            v.push_back({shoulder + off, shoulder, PartTag::head, 0.722, kPi / 2.0, down, true, false});
        }
        // legs: 4 points each, amplitude growing toward the foot
        const double amp[4] = {0.667, 0.778, 0.889, 1.0};
        const double drop[4] = {7.5, 15.0, 22.5, 30.0};
        for (int leg = 0; leg < 2; ++leg) {
            const Vec2 hip = leg == 0 ? Vec2{25.0, 0.0} : Vec2{5.0, 0.0};
            const double phase = leg == 0 ? 0.0 : kPi;  // antiphase gait
            for (int i = 0; i < 4; ++i) {
                v.push_back({hip + Vec2{0.0, drop[i]}, hip, PartTag::limb, amp[i], phase, right,
                             false, leg == 0});
            }
        }
        return v;
    }();
    return pts;
}

double smoothstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

// Deflection of point p at local segment time tau (offset from its rest pose).
Vec2 deflection(const SkeletonPoint& p, const BehaviorSegment& seg, int tau, double scale) {
    const double amp = seg.amplitude * scale;
    if (seg.behavior == "walk" || seg.behavior == "run") {
        if (p.amp_scale == 0.0) {
            return {};
        }
        const double s = std::sin(2.0 * kPi * tau / seg.period + p.phase);
        return p.osc_dir * (amp * p.amp_scale * s);
    }
    if (seg.behavior == "turn-head" && p.head_chain) {
        const double angle = -(seg.amplitude / 7.0) * 2.2 * smoothstep(static_cast<double>(tau) / seg.duration);
        const Vec2 arm = (p.rest - p.attach) * scale;
        return rotate(arm, angle) - arm;
    }
    if (seg.behavior == "stretch" && p.front_leg) {
        const double angle = -(seg.amplitude / 7.0) * smoothstep(static_cast<double>(tau) / seg.duration);
        const Vec2 arm = (p.rest - p.attach) * scale;
        return rotate(arm, angle) - arm;
    }
    // "still" and every non-participating point
    return {};
}

}  // namespace

BehaviorSegment default_segment(const std::string& behavior) {
    BehaviorSegment seg;
    seg.behavior = behavior;
    if (behavior == "walk") {
        seg.duration = 48;
        seg.period = 8.0;
        seg.amplitude = 7.0;
        seg.velocity = {2.0, 0.0};
    } else if (behavior == "run") {
        seg.duration = 30;
        seg.period = 5.0;
        seg.amplitude = 10.0;
        seg.velocity = {4.0, 0.0};
    } else if (behavior == "turn-head") {
        seg.duration = 22;
        seg.amplitude = 7.0;
        seg.velocity = {0.0, 0.0};
    } else if (behavior == "stretch") {
        seg.duration = 20;
        seg.amplitude = 7.0;
        seg.velocity = {0.0, 0.0};
    } else if (behavior == "still") {
        seg.duration = 6;
        seg.amplitude = 0.0;
        seg.velocity = {0.0, 0.0};
    } else {
        throw std::invalid_argument("unknown behavior: " + behavior);
    }
    return seg;
}

SynthShot generate_shot(const BehaviorScript& script, std::uint64_t seed, int shot_id) {
    if (script.segments.empty()) {
        throw std::invalid_argument("behavior script needs at least one segment");
    }
    for (const auto& seg : script.segments) {
        if (seg.duration < 1) {
            throw std::invalid_argument("behavior segment duration must be >= 1");
        }
        if ((seg.behavior == "walk" || seg.behavior == "run") && seg.period < 2.0) {
            throw std::invalid_argument("periodic behavior needs period >= 2");
        }
    }
    Rng rng(seed);
    const auto& skel = skeleton();
    const double scale = script.scale;

    int total = 0;
    for (const auto& seg : script.segments) {
        total += seg.duration;
    }
    const int num_frames = total + 1;

    SynthShot out;
    out.script = script;
    Shot& shot = out.shot;
    shot.shot_id = shot_id;
    shot.num_frames = num_frames;

    const Vec2 root0{100.0 + rng.next_uniform(0.0, 50.0), 100.0 + rng.next_uniform(0.0, 50.0)};

    // Foreground skeleton trajectories, full shot length.
    const std::size_t n_fg = skel.size();
    std::vector<std::vector<Vec2>> pos(n_fg);
    for (auto& p : pos) {
        p.reserve(static_cast<std::size_t>(num_frames));
    }

    Vec2 root = root0;
    int seg_idx = 0;
    int tau = 0;
    // Behavior owning each transition; frame t inherits transition t's label.
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(num_frames));

    auto emit_pose = [&](const BehaviorSegment& seg, int local_tau, bool frozen) {
        for (std::size_t i = 0; i < n_fg; ++i) {
            if (frozen) {
                pos[i].push_back(pos[i].back());
                continue;
            }
            Vec2 p = root + skel[i].rest * scale + deflection(skel[i], seg, local_tau, scale);
            p.x = quantize_coord(p.x + rng.next_normal(0.0, script.noise_std));
            p.y = quantize_coord(p.y + rng.next_normal(0.0, script.noise_std));
            pos[i].push_back(p);
        }
    };

    emit_pose(script.segments.front(), 0, false);
    for (int t = 0; t < total; ++t) {
        while (tau >= script.segments[static_cast<std::size_t>(seg_idx)].duration) {
            tau = 0;
            ++seg_idx;
        }
        const BehaviorSegment& seg = script.segments[static_cast<std::size_t>(seg_idx)];
        labels.push_back(seg.behavior);
        const bool still = seg.behavior == "still";
        if (!still) {
            root += seg.velocity * scale;
        }
        emit_pose(seg, tau + 1, still);
        ++tau;
    }
    labels.push_back(labels.back());  // final frame

    int next_id = 0;
    for (std::size_t i = 0; i < n_fg; ++i) {
        Trajectory t;
        t.id = next_id++;
        t.start_frame = 0;
        t.points = std::move(pos[i]);
        t.fg.assign(t.points.size(), true);
        shot.trajectories.push_back(std::move(t));
        out.parts.push_back(skel[i].part);
    }

    // Background distractors: drifting points, fg = false.
    for (int b = 0; b < script.background.count; ++b) {
        Trajectory t;
        t.id = next_id++;
        t.start_frame = 0;
        Vec2 p{rng.next_uniform(0.0, 400.0), rng.next_uniform(0.0, 300.0)};
        for (int f = 0; f < num_frames; ++f) {
            t.points.emplace_back(quantize_coord(p.x + rng.next_normal(0.0, script.noise_std)),
                                  quantize_coord(p.y + rng.next_normal(0.0, script.noise_std)));
            p += script.background.velocity;
        }
        t.fg.assign(t.points.size(), false);
        shot.trajectories.push_back(std::move(t));
        out.parts.push_back(PartTag::background);
    }

    shot.frame_labels = std::move(labels);
    shot.validate();

    // Ground-truth still runs, straight from the emitted positions.
    int run_start = -1;
    for (int k = 0; k < num_frames - 1; ++k) {
        bool all_still = true;
        for (std::size_t i = 0; i < n_fg; ++i) {
            const auto& tr = shot.trajectories[i];
            if (!(tr.points[static_cast<std::size_t>(k)] == tr.points[static_cast<std::size_t>(k) + 1])) {
                all_still = false;
                break;
            }
        }
        if (all_still && run_start < 0) {
            run_start = k;
        } else if (!all_still && run_start >= 0) {
            out.zero_motion_runs.emplace_back(run_start, k);
            run_start = -1;
        }
    }
    if (run_start >= 0) {
        out.zero_motion_runs.emplace_back(run_start, num_frames - 1);
    }
    return out;
}

BehaviorScript sample_script(const ScriptSampler& sampler, std::uint64_t seed, double noise_std,
                             const BackgroundSpec& background) {
    if (sampler.repertoire.empty()) {
        throw std::invalid_argument("script sampler needs a non-empty repertoire");
    }
    Rng rng(seed);
    BehaviorScript script;
    script.noise_std = noise_std;
    script.background = background;
    script.scale = rng.next_uniform(sampler.scale_range.first, sampler.scale_range.second);

    const int n_segments = sampler.min_segments +
                           static_cast<int>(rng.next_index(
                               static_cast<std::uint64_t>(sampler.max_segments - sampler.min_segments + 1)));
    for (int s = 0; s < n_segments; ++s) {
        BehaviorSegment seg =
            sampler.repertoire[static_cast<std::size_t>(rng.next_index(sampler.repertoire.size()))];
        const double jitter = rng.next_uniform(0.75, 1.25);
        seg.duration = std::max(1, static_cast<int>(std::lround(seg.duration * jitter)));
        script.segments.push_back(seg);
        if (s + 1 < n_segments && rng.next_double() < sampler.still_gap_prob) {
            BehaviorSegment gap = default_segment("still");
            gap.duration = sampler.still_gap_frames.first +
                           static_cast<int>(rng.next_index(static_cast<std::uint64_t>(
                               sampler.still_gap_frames.second - sampler.still_gap_frames.first + 1)));
            script.segments.push_back(gap);
        }
    }
    return script;
}

std::vector<SynthShot> generate_dataset(const ScriptSampler& sampler, int num_shots,
                                        std::uint64_t seed, double noise_std,
                                        const BackgroundSpec& background) {
    std::vector<SynthShot> shots(static_cast<std::size_t>(num_shots));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < num_shots; ++i) {
        const std::uint64_t shot_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        const BehaviorScript script = sample_script(sampler, shot_seed, noise_std, background);
        shots[static_cast<std::size_t>(i)] = generate_shot(script, derive_seed(shot_seed, 1), i);
    }
    return shots;
}

ScriptSampler default_sampler() {
    ScriptSampler s;
    for (const char* b : {"walk", "run", "turn-head", "stretch", "still"}) {
        s.repertoire.push_back(default_segment(b));
    }
    return s;
}

namespace {

using nlohmann::json;

BehaviorSegment segment_from_json(const json& j) {
    if (!j.contains("behavior")) {
        throw std::runtime_error("synth config: segment without 'behavior'");
    }
    BehaviorSegment seg = default_segment(j.at("behavior").get<std::string>());
    if (j.contains("duration")) seg.duration = j.at("duration").get<int>();
    if (j.contains("period")) seg.period = j.at("period").get<double>();
    if (j.contains("amplitude")) seg.amplitude = j.at("amplitude").get<double>();
    if (j.contains("velocity")) {
        seg.velocity = {j.at("velocity").at(0).get<double>(), j.at("velocity").at(1).get<double>()};
    }
    return seg;
}

}  // namespace

SynthConfig load_synth_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open synth config: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("synth config " + path + ": " + e.what());
    }
    SynthConfig cfg;
    if (j.contains("noise_std")) cfg.noise_std = j.at("noise_std").get<double>();
    if (j.contains("scale")) cfg.scale = j.at("scale").get<double>();
    if (j.contains("background")) {
        const auto& b = j.at("background");
        if (b.contains("count")) cfg.background.count = b.at("count").get<int>();
        if (b.contains("velocity")) {
            cfg.background.velocity = {b.at("velocity").at(0).get<double>(),
                                       b.at("velocity").at(1).get<double>()};
        }
    }
    if (j.contains("segments")) {
        for (const auto& s : j.at("segments")) {
            cfg.segments.push_back(segment_from_json(s));
        }
    }
    if (j.contains("sampler")) {
        cfg.has_sampler = true;
        const auto& s = j.at("sampler");
        ScriptSampler& sampler = cfg.sampler;
        if (s.contains("behaviors")) {
            for (const auto& b : s.at("behaviors")) {
                sampler.repertoire.push_back(segment_from_json(b));
            }
        } else {
            sampler = default_sampler();
        }
        if (s.contains("min_segments")) sampler.min_segments = s.at("min_segments").get<int>();
        if (s.contains("max_segments")) sampler.max_segments = s.at("max_segments").get<int>();
        if (s.contains("still_gap_prob")) sampler.still_gap_prob = s.at("still_gap_prob").get<double>();
        if (s.contains("still_gap_frames")) {
            sampler.still_gap_frames = {s.at("still_gap_frames").at(0).get<int>(),
                                        s.at("still_gap_frames").at(1).get<int>()};
        }
        if (s.contains("scale_range")) {
            sampler.scale_range = {s.at("scale_range").at(0).get<double>(),
                                   s.at("scale_range").at(1).get<double>()};
        }
    }
    if (cfg.segments.empty() && !cfg.has_sampler) {
        throw std::runtime_error("synth config " + path + ": needs 'segments' or 'sampler'");
    }
    return cfg;
}

}  // namespace potminer::synth
