#include "potminer/motion_stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace potminer {

namespace {

// Lower of the two middle values for an even count.
double lower_median(std::vector<double>& v) {
    const std::size_t idx = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
    return v[idx];
}

void stats_at_transition(const Shot& shot, int k, FrameMotionStats& out) {
    std::vector<double> xs, ys, speeds;
    for (const auto& t : shot.trajectories) {
        if (!t.fg_transition(k)) {
            continue;
        }
        const Vec2 v = t.velocity(k);
        xs.push_back(v.x);
        ys.push_back(v.y);
        speeds.push_back(v.norm());
    }
    const std::size_t ku = static_cast<std::size_t>(k);
    if (xs.empty()) {
        out.median_present[ku] = 0;
        out.median_velocity[ku] = Vec2{};
        out.sigma[ku] = 0.0;
        return;
    }
    out.median_present[ku] = 1;
    out.median_velocity[ku] = Vec2{lower_median(xs), lower_median(ys)};

    double mean = 0.0;
    for (double s : speeds) {
        mean += s;
    }
    mean /= static_cast<double>(speeds.size());
    if (mean <= 0.0) {
        out.sigma[ku] = 0.0;
        return;
    }
    double var = 0.0;
    for (double s : speeds) {
        var += (s - mean) * (s - mean);
    }
    var /= static_cast<double>(speeds.size());
    out.sigma[ku] = std::sqrt(var) / mean;
}

FrameMotionStats compute_impl(const Shot& shot, int n, bool parallel) {
    if (n < 2) {
        throw std::invalid_argument("compute_frame_motion_stats: n must be >= 2");
    }
    const int transitions = std::max(0, shot.num_frames - 1);
    FrameMotionStats stats;
    stats.median_present.assign(static_cast<std::size_t>(transitions), 0);
    stats.median_velocity.assign(static_cast<std::size_t>(transitions), Vec2{});
    stats.sigma.assign(static_cast<std::size_t>(transitions), 0.0);

    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int k = 0; k < transitions; ++k) {
            stats_at_transition(shot, k, stats);
        }
    } else {
        for (int k = 0; k < transitions; ++k) {
            stats_at_transition(shot, k, stats);
        }
    }

    // s(f) = mean of sigma over the n transitions starting at f.
    const int score_frames = std::max(0, transitions - n + 1);
    stats.articulation_score.assign(static_cast<std::size_t>(score_frames), 0.0);
    for (int f = 0; f < score_frames; ++f) {
        double acc = 0.0;
        for (int i = f; i < f + n; ++i) {
            acc += stats.sigma[static_cast<std::size_t>(i)];
        }
        stats.articulation_score[static_cast<std::size_t>(f)] = acc / static_cast<double>(n);
    }
    return stats;
}

}  // namespace

FrameMotionStats compute_frame_motion_stats(const Shot& shot, int n) {
    return compute_impl(shot, n, true);
}

FrameMotionStats compute_frame_motion_stats_serial(const Shot& shot, int n) {
    return compute_impl(shot, n, false);
}

}  // namespace potminer
