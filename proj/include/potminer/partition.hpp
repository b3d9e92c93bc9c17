#pragma once

#include "potminer/motion_stats.hpp"
#include "potminer/pot.hpp"
#include "potminer/trajectory.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace potminer {

struct Interval {
    enum class Origin { whole_shot, pause_split, periodic, remainder };

    int shot_id = 0;
    int start_frame = 0;  // inclusive
    int end_frame = 0;    // exclusive
    Origin origin = Origin::whole_shot;
    double period = 0.0;  // frames, set for periodic intervals

    int length() const { return end_frame - start_frame; }
};

std::string origin_name(Interval::Origin o);
Interval::Origin origin_from_name(const std::string& name);

struct PeriodicityConfig {
    double theta_h = 0.1;  // minimum normalized peak height
    int min_period = 5;    // frames
    int min_cycles = 3;    // repetitions inside the window
    // Codeword activations from quantized PoTs are near-impulses, which
    // spread a gait's energy across the whole harmonic comb; a short
    // moving average concentrates it at the fundamental. Disabled for
    // short windows where it colors the noise floor instead.
    int smooth_width = 3;       // centered boxcar, odd; 1 disables
    int smooth_min_window = 30; // no smoothing below this window length
    // After the peak window is found, boundaries extend while the peak
    // stays within this relative band of the maximum, so a uniformly
    // periodic span is not trimmed to its crispest sub-window.
    double extend_tolerance = 0.05;

    void validate() const;
    int min_window() const { return min_period * min_cycles; }
};

/// Pause runs (>= 3 consecutive transitions with sigma below theta_f) and
/// the complementary pause-split intervals, both as frame ranges.
struct PauseSplit {
    std::vector<std::pair<int, int>> pauses;
    std::vector<std::pair<int, int>> intervals;
};

PauseSplit detect_pauses(const Shot& shot, const FrameMotionStats& stats, double theta_f);

/// Per-frame codeword histogram sequence s(t), stored per active codeword.
/// Frames without PoTs contribute zero weight everywhere.
struct FrameCodewordSequence {
    int length = 0;
    std::map<int, std::vector<double>> series;  // codeword -> weight per frame
};

/// PoTs are indexed by start frame; with span_indexing a PoT contributes
/// to every frame of its n-frame window instead.
FrameCodewordSequence framewise_codeword_sequence(int start_frame, int end_frame,
                                                  const std::vector<PoTRecord>& pots,
                                                  const std::vector<int>& codewords,
                                                  int num_codewords, bool span_indexing = false,
                                                  int n = 10);

/// Two-sided magnitude spectrum of the mean-subtracted per-codeword window
/// slices, summed across codewords. normalized[j-1] is bin j's share of
/// the total non-DC magnitude; all-zero when the window carries no signal.
/// `smooth_width` > 1 applies a centered moving average to each slice
/// first (truncated at the window edges).
struct WindowSpectrum {
    std::vector<double> normalized;  // bins 1 .. len-1
    double total_magnitude = 0.0;
};

WindowSpectrum window_spectrum(const FrameCodewordSequence& seq, int start, int len,
                               int smooth_width = 1);

struct PeriodicDetection {
    int start = 0;  // relative to the sequence, [start, end)
    int end = 0;
    double period = 0.0;
    double peak = 0.0;
};

/// Sliding-window search for the strongest periodic sub-interval: window
/// lengths grow multiplicatively (x1.25) from min_period*min_cycles, with
/// strides of length/8; the best coarse window is refined by unit-step
/// boundary moves. Returns nullopt when no peak reaches theta_h.
std::optional<PeriodicDetection> detect_periodic_interval(const FrameCodewordSequence& seq,
                                                          const PeriodicityConfig& cfg);
std::optional<PeriodicDetection> detect_periodic_interval_serial(const FrameCodewordSequence& seq,
                                                                 const PeriodicityConfig& cfg);

struct PartitionConfig {
    double theta_f = 0.1;
    PeriodicityConfig periodicity{};
    int min_remainder = 5;  // shorter remainders merge into the peeled interval
    bool span_indexing = false;
    int n = 10;

    void validate() const;
};

/// Pause splitting first, then recursive peeling of periodic sub-intervals
/// (highest peak first). Emitted intervals are disjoint, temporally
/// ordered, and together with the pause ranges tile [0, num_frames).
std::vector<Interval> partition_shot(const Shot& shot, const FrameMotionStats& stats,
                                     const std::vector<PoTRecord>& shot_pots,
                                     const std::vector<int>& codewords, int num_codewords,
                                     const PartitionConfig& cfg);

// interval <shot_id> <start> <end> <origin> [<period>]
void write_intervals(const std::vector<Interval>& intervals, std::ostream& out);
void save_intervals(const std::vector<Interval>& intervals, const std::string& path);
std::vector<Interval> load_intervals(const std::string& path);

}  // namespace potminer
