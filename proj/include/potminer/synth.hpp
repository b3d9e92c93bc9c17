#pragma once

#include "potminer/trajectory.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace potminer::synth {

/// One behavior segment. `duration` counts frame transitions driven by the
/// segment; a shot with segments of total duration T has T+1 frames.
struct BehaviorSegment {
    std::string behavior;    // walk | run | turn-head | stretch | still
    int duration = 0;
    double period = 8.0;     // frames per cycle (walk/run)
    double amplitude = 7.0;  // peak deflection of the fastest point, px (base scale)
    Vec2 velocity{};         // root translation per frame
};

struct BackgroundSpec {
    int count = 0;
    Vec2 velocity{-1.0, 0.0};
};

struct BehaviorScript {
    std::vector<BehaviorSegment> segments;
    double scale = 1.0;      // skeleton + amplitude multiplier
    double noise_std = 0.3;  // positional jitter, px (frozen during stills)
    BackgroundSpec background;
};

/// Randomized per-shot script composition, used by dataset generation.
struct ScriptSampler {
    std::vector<BehaviorSegment> repertoire;
    int min_segments = 2;
    int max_segments = 4;
    double still_gap_prob = 0.6;          // chance of a still gap between segments
    std::pair<int, int> still_gap_frames{5, 9};
    std::pair<double, double> scale_range{0.5, 2.0};
};

enum class PartTag { torso, head, limb, background };

/// Generated shot plus construction-time ground truth for tests.
struct SynthShot {
    Shot shot;
    std::vector<PartTag> parts;  // aligned with shot.trajectories
    // Maximal transition ranges [begin, end) where every fg point is bit-still.
    std::vector<std::pair<int, int>> zero_motion_runs;
    BehaviorScript script;
};

BehaviorSegment default_segment(const std::string& behavior);

SynthShot generate_shot(const BehaviorScript& script, std::uint64_t seed, int shot_id = 0);

/// One shot per sampled script; deterministic given (sampler, seed).
std::vector<SynthShot> generate_dataset(const ScriptSampler& sampler, int num_shots,
                                        std::uint64_t seed, double noise_std = 0.3,
                                        const BackgroundSpec& background = {});

BehaviorScript sample_script(const ScriptSampler& sampler, std::uint64_t seed,
                             double noise_std, const BackgroundSpec& background);

// Script/sampler config file (JSON), see README for the schema.
struct SynthConfig {
    double noise_std = 0.3;
    BackgroundSpec background;
    double scale = 1.0;
    std::vector<BehaviorSegment> segments;  // explicit mode, may be empty
    bool has_sampler = false;
    ScriptSampler sampler;
};

SynthConfig load_synth_config(const std::string& path);

/// Sampler covering the five stock behaviors; used as the built-in default.
ScriptSampler default_sampler();

}  // namespace potminer::synth
