#pragma once

#include "potminer/motion_stats.hpp"
#include "potminer/trajectory.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace potminer {

struct SelectionConfig {
    int n = 10;                      // PoT length in frames
    double theta_p = 0.15;           // retention fraction per frame
    double theta_f = 0.1;            // articulation score floor
    double max_pair_distance = 0.0;  // spatial cap at the start frame, 0 = off

    void validate() const;
};

/// An ordered candidate pair at a start frame. The anchor is the member
/// whose velocity stays closer to the median foreground velocity over the
/// window; the score is the swing-minus-anchor deviation gap (>= 0).
struct PoTCandidate {
    int anchor_id = 0;
    int swing_id = 0;
    int start_frame = 0;
    double score = 0.0;
};

/// Relative-motion descriptor: the first-frame anchor->swing angle plus
/// n-1 displacement vectors normalized by the total displacement D.
struct PoTDescriptor {
    double theta = 0.0;               // radians in [-pi, pi)
    std::vector<Vec2> displacements;  // d^k / D, k = 2..n
    double total_displacement = 0.0;  // D, kept for diagnostics

    // (theta, d2x, d2y, ..., dnx, dny): 2(n-1)+1 values.
    std::vector<double> flatten() const;
};

/// A selected PoT with its descriptor, the unit written to the pot dump.
struct PoTRecord {
    int shot_id = 0;
    int start_frame = 0;
    int anchor_id = 0;
    int swing_id = 0;
    double score = 0.0;
    PoTDescriptor descriptor;
};

/// Sum over transitions [f, f+n) of the distance to the median velocity.
/// Pre: trajectory covers [f, f+n] and the median is present throughout.
double deviation_sum(const Trajectory& t, const FrameMotionStats& stats, int f, int n);

/// (anchor id, swing id); ties go to the lower trajectory id.
std::pair<int, int> order_pair(const Trajectory& ti, const Trajectory& tj,
                               const FrameMotionStats& stats, int f, int n);

double score_candidate(const Trajectory& anchor, const Trajectory& swing,
                       const FrameMotionStats& stats, int f, int n);

/// Top-ceil(theta_p * M) candidates per unpruned frame, grouped by start
/// frame (index f of the result). Frames with s(f) < theta_f are empty.
std::vector<std::vector<PoTCandidate>> select_pots(const Shot& shot, const FrameMotionStats& stats,
                                                   const SelectionConfig& cfg);
std::vector<std::vector<PoTCandidate>> select_pots_serial(const Shot& shot,
                                                          const FrameMotionStats& stats,
                                                          const SelectionConfig& cfg);

/// nullopt when the pair is rigid (D below 1e-9); the caller drops it.
std::optional<PoTDescriptor> compute_descriptor(const Trajectory& anchor, const Trajectory& swing,
                                                int f, int n);

/// Single-trajectory shape baseline: n-1 displacement vectors divided by
/// the sum of their magnitudes, flattened. nullopt when degenerate.
std::optional<std::vector<double>> compute_ts_descriptor(const Trajectory& t, int f, int n);

/// select_pots + compute_descriptor, degenerate pairs dropped, ordered by
/// (start frame, rank).
std::vector<PoTRecord> extract_pots(const Shot& shot, const FrameMotionStats& stats,
                                    const SelectionConfig& cfg);

struct TsRecord {
    int shot_id = 0;
    int start_frame = 0;
    int traj_id = 0;
    std::vector<double> descriptor;
};

/// TS descriptors of every foreground trajectory at every frame where the
/// n-window fits, degenerate windows dropped.
std::vector<TsRecord> extract_ts(const Shot& shot, const SelectionConfig& cfg);

// --- dump formats -----------------------------------------------------
// pot <shot_id> <f> <anchor_id> <swing_id> <score> <theta> <dx2> <dy2> ...
// ts  <shot_id> <f> <traj_id> <dx1> <dy1> ...
// D is diagnostic only and not serialized.

void write_pot_dump(const std::vector<PoTRecord>& pots, std::ostream& out);
void save_pot_dump(const std::vector<PoTRecord>& pots, const std::string& path);
std::vector<PoTRecord> load_pot_dump(const std::string& path);

void write_ts_dump(const std::vector<TsRecord>& ts, std::ostream& out);
void save_ts_dump(const std::vector<TsRecord>& ts, const std::string& path);
std::vector<TsRecord> load_ts_dump(const std::string& path);

}  // namespace potminer
