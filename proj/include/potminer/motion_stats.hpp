#pragma once

#include "potminer/trajectory.hpp"

#include <cstdint>
#include <vector>

namespace potminer {

/// Per-transition foreground motion statistics plus the windowed
/// articulation score s(f). Transition k sits between frames k and k+1;
/// a shot with N frames has N-1 transitions.
struct FrameMotionStats {
    std::vector<std::uint8_t> median_present;  // 0 when no fg velocity exists
    std::vector<Vec2> median_velocity;      // component-wise median of fg velocities
    std::vector<double> sigma;              // std of fg speeds / mean fg speed, 0 if mean is 0
    std::vector<double> articulation_score; // s(f) = mean of sigma over [f, f+n-1]

    int num_transitions() const { return static_cast<int>(sigma.size()); }
    int num_score_frames() const { return static_cast<int>(articulation_score.size()); }
};

FrameMotionStats compute_frame_motion_stats(const Shot& shot, int n);
FrameMotionStats compute_frame_motion_stats_serial(const Shot& shot, int n);

}  // namespace potminer
