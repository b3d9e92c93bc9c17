#pragma once

#include "potminer/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace potminer {

/// A tracked 2D point over a contiguous frame range, with a per-frame
/// foreground flag. Immutable after construction by convention.
struct Trajectory {
    int id = 0;
    int start_frame = 0;
    std::vector<Vec2> points;
    std::vector<bool> fg;

    int length() const { return static_cast<int>(points.size()); }
    int end_frame() const { return start_frame + length(); }  // exclusive

    bool covers(int first, int last_inclusive) const {
        return start_frame <= first && last_inclusive < end_frame();
    }

    const Vec2& at(int frame) const { return points[static_cast<std::size_t>(frame - start_frame)]; }
    bool fg_at(int frame) const { return fg[static_cast<std::size_t>(frame - start_frame)]; }

    // Velocity at transition k, defined as points[k+1] - points[k] in
    // absolute frame indices. Caller guarantees coverage of k and k+1.
    Vec2 velocity(int k) const { return at(k + 1) - at(k); }

    // True iff the trajectory covers transition k with fg set at both ends.
    bool fg_transition(int k) const { return covers(k, k + 1) && fg_at(k) && fg_at(k + 1); }
};

struct Shot {
    int shot_id = 0;
    int num_frames = 0;
    std::vector<Trajectory> trajectories;
    std::optional<std::vector<std::string>> frame_labels;

    /// Throws std::invalid_argument on any invariant violation.
    void validate() const;
};

using Dataset = std::vector<Shot>;

}  // namespace potminer
