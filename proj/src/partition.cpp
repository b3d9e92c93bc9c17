#include "potminer/partition.hpp"

#include "potminer/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace potminer {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPeakTieEps = 1e-9;

}  // namespace

std::string origin_name(Interval::Origin o) {
    switch (o) {
        case Interval::Origin::whole_shot: return "whole-shot";
        case Interval::Origin::pause_split: return "pause-split";
        case Interval::Origin::periodic: return "periodic";
        case Interval::Origin::remainder: return "remainder";
    }
    return "unknown";
}

Interval::Origin origin_from_name(const std::string& name) {
    if (name == "whole-shot") return Interval::Origin::whole_shot;
    if (name == "pause-split") return Interval::Origin::pause_split;
    if (name == "periodic") return Interval::Origin::periodic;
    if (name == "remainder") return Interval::Origin::remainder;
    throw std::invalid_argument("unknown interval origin: " + name);
}

void PeriodicityConfig::validate() const {
    if (theta_h <= 0.0) throw std::invalid_argument("periodicity: theta_h must be > 0");
    if (min_period < 2) throw std::invalid_argument("periodicity: min_period must be >= 2");
    if (min_cycles < 1) throw std::invalid_argument("periodicity: min_cycles must be >= 1");
    if (smooth_width < 1 || smooth_width % 2 == 0) {
        throw std::invalid_argument("periodicity: smooth_width must be odd and >= 1");
    }
    if (smooth_min_window < 0) {
        throw std::invalid_argument("periodicity: smooth_min_window must be >= 0");
    }
    if (extend_tolerance < 0.0 || extend_tolerance >= 1.0) {
        throw std::invalid_argument("periodicity: extend_tolerance must be in [0, 1)");
    }
}

void PartitionConfig::validate() const {
    if (theta_f < 0.0) throw std::invalid_argument("partition: theta_f must be >= 0");
    if (min_remainder < 0) throw std::invalid_argument("partition: min_remainder must be >= 0");
    if (n < 2) throw std::invalid_argument("partition: n must be >= 2");
    periodicity.validate();
}

PauseSplit detect_pauses(const Shot& shot, const FrameMotionStats& stats, double theta_f) {
    PauseSplit out;
    const int transitions = stats.num_transitions();
    int run_start = -1;
    for (int k = 0; k <= transitions; ++k) {
        const bool still = k < transitions && stats.sigma[static_cast<std::size_t>(k)] < theta_f;
        if (still && run_start < 0) {
            run_start = k;
        } else if (!still && run_start >= 0) {
            if (k - run_start >= 3) {
                // A run reaching the final transition swallows the last frame.
                const int end = k == transitions ? shot.num_frames : k;
                out.pauses.emplace_back(run_start, end);
            }
            run_start = -1;
        }
    }
    int cursor = 0;
    for (const auto& [ps, pe] : out.pauses) {
        if (ps > cursor) {
            out.intervals.emplace_back(cursor, ps);
        }
        cursor = pe;
    }
    if (cursor < shot.num_frames) {
        out.intervals.emplace_back(cursor, shot.num_frames);
    }
    return out;
}

FrameCodewordSequence framewise_codeword_sequence(int start_frame, int end_frame,
                                                  const std::vector<PoTRecord>& pots,
                                                  const std::vector<int>& codewords,
                                                  int num_codewords, bool span_indexing, int n) {
    if (pots.size() != codewords.size()) {
        throw std::invalid_argument("framewise_codeword_sequence: pots/codewords size mismatch");
    }
    FrameCodewordSequence seq;
    seq.length = end_frame - start_frame;
    if (seq.length <= 0) {
        seq.length = 0;
        return seq;
    }
    // Raw counts per frame, then L1-normalize frame by frame.
    std::vector<double> frame_total(static_cast<std::size_t>(seq.length), 0.0);
    for (std::size_t i = 0; i < pots.size(); ++i) {
        const int f = pots[i].start_frame;
        const int cw = codewords[i];
        if (cw < 0 || cw >= num_codewords) {
            throw std::invalid_argument("framewise_codeword_sequence: codeword out of range");
        }
        const int lo = span_indexing ? std::max(start_frame, f) : f;
        const int hi = span_indexing ? std::min(end_frame, f + n) : f + 1;
        for (int t = lo; t < hi; ++t) {
            if (t < start_frame || t >= end_frame) {
                continue;
            }
            auto& series = seq.series[cw];
            if (series.empty()) {
                series.assign(static_cast<std::size_t>(seq.length), 0.0);
            }
            series[static_cast<std::size_t>(t - start_frame)] += 1.0;
            frame_total[static_cast<std::size_t>(t - start_frame)] += 1.0;
        }
    }
    for (auto& [cw, series] : seq.series) {
        for (std::size_t t = 0; t < series.size(); ++t) {
            if (frame_total[t] > 0.0) {
                series[t] /= frame_total[t];
            }
        }
    }
    return seq;
}

WindowSpectrum window_spectrum(const FrameCodewordSequence& seq, int start, int len,
                               int smooth_width) {
    WindowSpectrum out;
    if (len < 2 || start < 0 || start + len > seq.length) {
        throw std::invalid_argument("window_spectrum: window out of range");
    }
    const auto ulen = static_cast<std::size_t>(len);
    std::vector<double> magnitude(ulen, 0.0);  // bins 0..len-1, DC unused

    std::vector<double> cos_tab(ulen), sin_tab(ulen);
    for (std::size_t i = 0; i < ulen; ++i) {
        cos_tab[i] = std::cos(2.0 * kPi * static_cast<double>(i) / len);
        sin_tab[i] = std::sin(2.0 * kPi * static_cast<double>(i) / len);
    }

    std::vector<double> y(ulen);
    const int half = len / 2;
    const int reach = smooth_width / 2;
    for (const auto& [cw, series] : seq.series) {
        for (int t = 0; t < len; ++t) {
            double acc = 0.0;
            int cnt = 0;
            for (int d = -reach; d <= reach; ++d) {
                const int u = t + d;
                if (u >= 0 && u < len) {
                    acc += series[static_cast<std::size_t>(start + u)];
                    ++cnt;
                }
            }
            y[static_cast<std::size_t>(t)] = acc / static_cast<double>(cnt);
        }
        double mean = 0.0;
        for (int t = 0; t < len; ++t) {
            mean += y[static_cast<std::size_t>(t)];
        }
        mean /= static_cast<double>(len);
        double span = 0.0;
        for (int t = 0; t < len; ++t) {
            y[static_cast<std::size_t>(t)] -= mean;
            span = std::max(span, std::abs(y[static_cast<std::size_t>(t)]));
        }
        if (span < 1e-15) {
            continue;  // constant in this window
        }
        // Real input: |Y_j| mirrors around len/2, so compute one side.
        for (int j = 1; j <= half; ++j) {
            double re = 0.0, im = 0.0;
            std::size_t idx = 0;
            for (int t = 0; t < len; ++t) {
                re += y[static_cast<std::size_t>(t)] * cos_tab[idx];
                im -= y[static_cast<std::size_t>(t)] * sin_tab[idx];
                idx += static_cast<std::size_t>(j);
                if (idx >= ulen) {
                    idx -= ulen;
                }
            }
            magnitude[static_cast<std::size_t>(j)] += std::sqrt(re * re + im * im);
        }
    }
    for (int j = 1; j <= half; ++j) {
        const int mirror = len - j;
        if (mirror != j && mirror < len) {
            magnitude[static_cast<std::size_t>(mirror)] = magnitude[static_cast<std::size_t>(j)];
        }
    }
    double total = 0.0;
    for (int j = 1; j < len; ++j) {
        total += magnitude[static_cast<std::size_t>(j)];
    }
    out.total_magnitude = total;
    out.normalized.assign(static_cast<std::size_t>(len - 1), 0.0);
    if (total > 1e-12) {
        for (int j = 1; j < len; ++j) {
            out.normalized[static_cast<std::size_t>(j - 1)] =
                magnitude[static_cast<std::size_t>(j)] / total;
        }
    }
    return out;
}

namespace {

struct WindowScore {
    double peak = -1.0;
    double period = 0.0;
};

// Peak height: the eligible bin's share of total non-DC spectral energy
// (squared summed magnitudes). Eligible bins carry at least min_cycles
// repetitions and an implied period of at least min_period frames.
WindowScore score_window(const FrameCodewordSequence& seq, int start, int len,
                         const PeriodicityConfig& cfg) {
    WindowScore ws;
    const int width = len < cfg.smooth_min_window ? 1 : cfg.smooth_width;
    const WindowSpectrum spec = window_spectrum(seq, start, len, width);
    if (spec.total_magnitude <= 1e-12) {
        return ws;
    }
    double total_energy = 0.0;
    for (double m : spec.normalized) {
        total_energy += m * m;
    }
    const int j_max = len / cfg.min_period;
    for (int j = cfg.min_cycles; j <= j_max; ++j) {
        const double m = spec.normalized[static_cast<std::size_t>(j - 1)];
        const double p = m * m / total_energy;
        if (p > ws.peak) {
            ws.peak = p;
            ws.period = static_cast<double>(len) / static_cast<double>(j);
        }
    }
    return ws;
}

struct CandidateWindow {
    int start;
    int len;
};

std::optional<PeriodicDetection> detect_impl(const FrameCodewordSequence& seq,
                                             const PeriodicityConfig& cfg, bool parallel) {
    cfg.validate();
    const int w_min = cfg.min_window();
    const int L = seq.length;
    if (L < w_min || seq.series.empty()) {
        return std::nullopt;
    }

    // Length grid: multiplicative steps of 1.25 plus the full length;
    // enumerate longest first so float-level peak ties prefer more cycles.
    std::vector<int> lengths;
    for (int len = w_min; len < L;) {
        lengths.push_back(len);
        len = std::max(len + 1, static_cast<int>(std::lround(len * 1.25)));
    }
    lengths.push_back(L);
    std::reverse(lengths.begin(), lengths.end());

    std::vector<CandidateWindow> windows;
    for (int len : lengths) {
        const int stride = std::max(1, len / 8);
        int last = -1;
        for (int s = 0; s + len <= L; s += stride) {
            windows.push_back({s, len});
            last = s;
        }
        if (last != L - len) {
            windows.push_back({L - len, len});  // tail-aligned window
        }
    }

    std::vector<WindowScore> scores(windows.size());
    if (parallel) {
        const auto count = static_cast<std::ptrdiff_t>(windows.size());
#pragma omp parallel for schedule(dynamic, 4)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            scores[static_cast<std::size_t>(i)] =
                score_window(seq, windows[static_cast<std::size_t>(i)].start,
                             windows[static_cast<std::size_t>(i)].len, cfg);
        }
    } else {
        for (std::size_t i = 0; i < windows.size(); ++i) {
            scores[i] = score_window(seq, windows[i].start, windows[i].len, cfg);
        }
    }

    double best_peak = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (scores[i].peak > best_peak + kPeakTieEps) {
            best_peak = scores[i].peak;
            best_idx = i;
        }
    }
    if (best_peak < cfg.theta_h) {
        return std::nullopt;
    }

    // Local refinement toward the paper's exhaustive sub-interval search.
    // Phase 1, strict hill climb: boundary moves of one frame or one whole
    // period (the period jump crosses the valley between integer-cycle
    // alignments).
    int start = windows[best_idx].start;
    int end = start + windows[best_idx].len;
    WindowScore best = scores[best_idx];
    for (int step = 0; step < L; ++step) {
        const int p = std::max(2, static_cast<int>(std::lround(best.period)));
        int next_start = start, next_end = end;
        WindowScore next = best;
        const int deltas[4] = {-1, 1, -p, p};
        for (int boundary = 0; boundary < 2; ++boundary) {
            for (int delta : deltas) {
                const int s = boundary == 0 ? start + delta : start;
                const int e = boundary == 0 ? end : end + delta;
                if (s < 0 || e > L || e - s < w_min) {
                    continue;
                }
                const WindowScore cand = score_window(seq, s, e - s, cfg);
                if (cand.peak > next.peak + kPeakTieEps) {
                    next = cand;
                    next_start = s;
                    next_end = e;
                }
            }
        }
        if (next_start == start && next_end == end) {
            break;
        }
        start = next_start;
        end = next_end;
        best = next;
    }

    // Phase 2, band extension: a uniformly periodic span keeps an almost
    // constant peak across sub-windows, so grow the boundaries while the
    // peak holds within extend_tolerance of the maximum. Period-sized
    // steps first, so creep into neighboring noise pays its alignment
    // cost up front.
    const double floor_peak =
        std::max(cfg.theta_h, best.peak * (1.0 - cfg.extend_tolerance));
    WindowScore current = best;
    for (int step = 0; step < L; ++step) {
        const int p = std::max(2, static_cast<int>(std::lround(current.period)));
        bool moved = false;
        const int ext[4][2] = {{0, p}, {-p, 0}, {0, 1}, {-1, 0}};
        for (const auto& mv : ext) {
            const int s = start + mv[0];
            const int e = end + mv[1];
            if (s < 0 || e > L) {
                continue;
            }
            const WindowScore cand = score_window(seq, s, e - s, cfg);
            if (cand.peak >= floor_peak) {
                start = s;
                end = e;
                current = cand;
                moved = true;
                break;
            }
        }
        if (!moved) {
            break;
        }
    }

    PeriodicDetection det;
    det.start = start;
    det.end = end;
    det.period = current.period;
    det.peak = current.peak;
    return det;
}

}  // namespace

std::optional<PeriodicDetection> detect_periodic_interval(const FrameCodewordSequence& seq,
                                                          const PeriodicityConfig& cfg) {
    return detect_impl(seq, cfg, true);
}

std::optional<PeriodicDetection> detect_periodic_interval_serial(const FrameCodewordSequence& seq,
                                                                 const PeriodicityConfig& cfg) {
    return detect_impl(seq, cfg, false);
}

namespace {

void peel(const Shot& shot, const std::vector<PoTRecord>& pots, const std::vector<int>& codewords,
          int num_codewords, const PartitionConfig& cfg, int a, int b, Interval::Origin origin,
          std::vector<Interval>& out) {
    if (b <= a) {
        return;
    }
    Interval base;
    base.shot_id = shot.shot_id;
    base.start_frame = a;
    base.end_frame = b;
    base.origin = origin;
    if (b - a < cfg.periodicity.min_window()) {
        out.push_back(base);
        return;
    }
    const auto seq = framewise_codeword_sequence(a, b, pots, codewords, num_codewords,
                                                 cfg.span_indexing, cfg.n);
    const auto det = detect_periodic_interval(seq, cfg.periodicity);
    if (!det) {
        out.push_back(base);
        return;
    }
    int s = a + det->start;
    int e = a + det->end;
    if (s - a < cfg.min_remainder) {
        s = a;
    }
    if (b - e < cfg.min_remainder) {
        e = b;
    }
    Interval periodic;
    periodic.shot_id = shot.shot_id;
    periodic.start_frame = s;
    periodic.end_frame = e;
    periodic.origin = Interval::Origin::periodic;
    periodic.period = det->period;
    out.push_back(periodic);
    peel(shot, pots, codewords, num_codewords, cfg, a, s, Interval::Origin::remainder, out);
    peel(shot, pots, codewords, num_codewords, cfg, e, b, Interval::Origin::remainder, out);
}

}  // namespace

std::vector<Interval> partition_shot(const Shot& shot, const FrameMotionStats& stats,
                                     const std::vector<PoTRecord>& shot_pots,
                                     const std::vector<int>& codewords, int num_codewords,
                                     const PartitionConfig& cfg) {
    cfg.validate();
    const PauseSplit split = detect_pauses(shot, stats, cfg.theta_f);
    const auto base_origin =
        split.pauses.empty() ? Interval::Origin::whole_shot : Interval::Origin::pause_split;
    std::vector<Interval> out;
    for (const auto& [a, b] : split.intervals) {
        peel(shot, shot_pots, codewords, num_codewords, cfg, a, b, base_origin, out);
    }
    std::sort(out.begin(), out.end(),
              [](const Interval& x, const Interval& y) { return x.start_frame < y.start_frame; });

    // The peel can chop one long pattern into adjacent windows of the same
    // period; the recursion is meant to separate *different* periods, so
    // re-join those.
    std::vector<Interval> merged;
    for (const auto& iv : out) {
        if (!merged.empty()) {
            Interval& prev = merged.back();
            const bool both_periodic = prev.origin == Interval::Origin::periodic &&
                                       iv.origin == Interval::Origin::periodic;
            if (both_periodic && prev.end_frame == iv.start_frame &&
                std::abs(prev.period - iv.period) <= 1.0) {
                if (iv.length() > prev.length()) {
                    prev.period = iv.period;
                }
                prev.end_frame = iv.end_frame;
                continue;
            }
        }
        merged.push_back(iv);
    }
    return merged;
}

void write_intervals(const std::vector<Interval>& intervals, std::ostream& out) {
    char buf[40];
    for (const auto& iv : intervals) {
        out << "interval " << iv.shot_id << ' ' << iv.start_frame << ' ' << iv.end_frame << ' '
            << origin_name(iv.origin);
        if (iv.origin == Interval::Origin::periodic) {
            std::snprintf(buf, sizeof(buf), " %.17g", iv.period);
            out << buf;
        }
        out << '\n';
    }
}

void save_intervals(const std::vector<Interval>& intervals, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    write_intervals(intervals, out);
}

std::vector<Interval> load_intervals(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open intervals file: " + path);
    }
    std::vector<Interval> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream ss(line);
        std::string tag, origin;
        Interval iv;
        if (!(ss >> tag >> iv.shot_id >> iv.start_frame >> iv.end_frame >> origin) ||
            tag != "interval") {
            throw ParseError(path, lineno, "bad interval record");
        }
        iv.origin = origin_from_name(origin);
        if (iv.origin == Interval::Origin::periodic && !(ss >> iv.period)) {
            throw ParseError(path, lineno, "periodic interval without a period");
        }
        out.push_back(iv);
    }
    return out;
}

}  // namespace potminer
