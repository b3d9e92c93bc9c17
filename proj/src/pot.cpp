#include "potminer/pot.hpp"

#include "potminer/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace potminer {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegenerateEps = 1e-9;

void append_double(std::string& line, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), " %.17g", v);
    line += buf;
}

}  // namespace

void SelectionConfig::validate() const {
    if (n < 2) {
        throw std::invalid_argument("selection config: n must be >= 2");
    }
    if (!(theta_p > 0.0 && theta_p <= 1.0)) {
        throw std::invalid_argument("selection config: theta_p must be in (0, 1]");
    }
    if (theta_f < 0.0) {
        throw std::invalid_argument("selection config: theta_f must be >= 0");
    }
    if (max_pair_distance < 0.0) {
        throw std::invalid_argument("selection config: max_pair_distance must be >= 0");
    }
}

std::vector<double> PoTDescriptor::flatten() const {
    std::vector<double> out;
    out.reserve(1 + 2 * displacements.size());
    out.push_back(theta);
    for (const Vec2& d : displacements) {
        out.push_back(d.x);
        out.push_back(d.y);
    }
    return out;
}

double deviation_sum(const Trajectory& t, const FrameMotionStats& stats, int f, int n) {
    double acc = 0.0;
    for (int k = f; k < f + n; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (!stats.median_present[ku]) {
            throw std::invalid_argument("deviation_sum: median velocity absent at transition " +
                                        std::to_string(k));
        }
        acc += (t.velocity(k) - stats.median_velocity[ku]).norm();
    }
    return acc;
}

std::pair<int, int> order_pair(const Trajectory& ti, const Trajectory& tj,
                               const FrameMotionStats& stats, int f, int n) {
    const double di = deviation_sum(ti, stats, f, n);
    const double dj = deviation_sum(tj, stats, f, n);
    if (di < dj) {
        return {ti.id, tj.id};
    }
    if (dj < di) {
        return {tj.id, ti.id};
    }
    return ti.id <= tj.id ? std::make_pair(ti.id, tj.id) : std::make_pair(tj.id, ti.id);
}

double score_candidate(const Trajectory& anchor, const Trajectory& swing,
                       const FrameMotionStats& stats, int f, int n) {
    double acc = 0.0;
    for (int k = f; k < f + n; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (!stats.median_present[ku]) {
            throw std::invalid_argument("score_candidate: median velocity absent at transition " +
                                        std::to_string(k));
        }
        const Vec2& vm = stats.median_velocity[ku];
        acc += (swing.velocity(k) - vm).norm() - (anchor.velocity(k) - vm).norm();
    }
    return acc;
}

namespace {

// Valid at f: covers [f, f+n] with fg throughout, so all n scoring
// transitions have both endpoints on the foreground.
bool valid_at(const Trajectory& t, int f, int n) {
    if (!t.covers(f, f + n)) {
        return false;
    }
    for (int k = f; k <= f + n; ++k) {
        if (!t.fg_at(k)) {
            return false;
        }
    }
    return true;
}

void select_at_frame(const Shot& shot, const FrameMotionStats& stats, const SelectionConfig& cfg,
                     int f, std::vector<PoTCandidate>& out) {
    out.clear();
    if (stats.articulation_score[static_cast<std::size_t>(f)] < cfg.theta_f) {
        return;
    }
    for (int k = f; k < f + cfg.n; ++k) {
        if (!stats.median_present[static_cast<std::size_t>(k)]) {
            return;
        }
    }
    std::vector<const Trajectory*> valid;
    for (const auto& t : shot.trajectories) {
        if (valid_at(t, f, cfg.n)) {
            valid.push_back(&t);
        }
    }
    std::vector<PoTCandidate> candidates;
    std::vector<double> dev(valid.size());
    for (std::size_t i = 0; i < valid.size(); ++i) {
        dev[i] = deviation_sum(*valid[i], stats, f, cfg.n);
    }
    for (std::size_t i = 0; i < valid.size(); ++i) {
        for (std::size_t j = i + 1; j < valid.size(); ++j) {
            if (cfg.max_pair_distance > 0.0 &&
                distance(valid[i]->at(f), valid[j]->at(f)) > cfg.max_pair_distance) {
                continue;
            }
            std::size_t a = i, s = j;
            if (dev[j] < dev[i] || (dev[j] == dev[i] && valid[j]->id < valid[i]->id)) {
                a = j;
                s = i;
            }
            PoTCandidate c;
            c.anchor_id = valid[a]->id;
            c.swing_id = valid[s]->id;
            c.start_frame = f;
            c.score = dev[s] - dev[a];
            candidates.push_back(c);
        }
    }
    if (candidates.empty()) {
        return;
    }
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(cfg.theta_p * static_cast<double>(candidates.size())));
    std::sort(candidates.begin(), candidates.end(), [](const PoTCandidate& a, const PoTCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.anchor_id != b.anchor_id) return a.anchor_id < b.anchor_id;
        return a.swing_id < b.swing_id;
    });
    candidates.resize(std::min(keep, candidates.size()));
    out = std::move(candidates);
}

std::vector<std::vector<PoTCandidate>> select_impl(const Shot& shot, const FrameMotionStats& stats,
                                                   const SelectionConfig& cfg, bool parallel) {
    cfg.validate();
    const int frames = stats.num_score_frames();
    std::vector<std::vector<PoTCandidate>> by_frame(static_cast<std::size_t>(frames));
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 8)
        for (int f = 0; f < frames; ++f) {
            select_at_frame(shot, stats, cfg, f, by_frame[static_cast<std::size_t>(f)]);
        }
    } else {
        for (int f = 0; f < frames; ++f) {
            select_at_frame(shot, stats, cfg, f, by_frame[static_cast<std::size_t>(f)]);
        }
    }
    return by_frame;
}

}  // namespace

std::vector<std::vector<PoTCandidate>> select_pots(const Shot& shot, const FrameMotionStats& stats,
                                                   const SelectionConfig& cfg) {
    return select_impl(shot, stats, cfg, true);
}

std::vector<std::vector<PoTCandidate>> select_pots_serial(const Shot& shot,
                                                          const FrameMotionStats& stats,
                                                          const SelectionConfig& cfg) {
    return select_impl(shot, stats, cfg, false);
}

std::optional<PoTDescriptor> compute_descriptor(const Trajectory& anchor, const Trajectory& swing,
                                                int f, int n) {
    PoTDescriptor desc;
    desc.displacements.reserve(static_cast<std::size_t>(n - 1));
    Vec2 prev = swing.at(f) - anchor.at(f);
    const double theta = std::atan2(prev.y, prev.x);
    desc.theta = theta >= kPi ? theta - 2.0 * kPi : theta;
    double total = 0.0;
    for (int k = f + 1; k < f + n; ++k) {
        const Vec2 r = swing.at(k) - anchor.at(k);
        const Vec2 d = r - prev;
        desc.displacements.push_back(d);
        total += d.norm();
        prev = r;
    }
    if (total < kDegenerateEps) {
        return std::nullopt;
    }
    for (Vec2& d : desc.displacements) {
        d = d * (1.0 / total);
    }
    desc.total_displacement = total;
    return desc;
}

std::optional<std::vector<double>> compute_ts_descriptor(const Trajectory& t, int f, int n) {
    std::vector<Vec2> disp;
    disp.reserve(static_cast<std::size_t>(n - 1));
    double total = 0.0;
    for (int k = f; k < f + n - 1; ++k) {
        const Vec2 d = t.velocity(k);
        disp.push_back(d);
        total += d.norm();
    }
    if (total < kDegenerateEps) {
        return std::nullopt;
    }
    std::vector<double> out;
    out.reserve(2 * disp.size());
    for (const Vec2& d : disp) {
        out.push_back(d.x / total);
        out.push_back(d.y / total);
    }
    return out;
}

std::vector<PoTRecord> extract_pots(const Shot& shot, const FrameMotionStats& stats,
                                    const SelectionConfig& cfg) {
    const auto by_frame = select_pots(shot, stats, cfg);
    std::unordered_map<int, const Trajectory*> by_id;
    for (const auto& t : shot.trajectories) {
        by_id.emplace(t.id, &t);
    }
    std::vector<PoTRecord> out;
    for (const auto& frame : by_frame) {
        for (const PoTCandidate& c : frame) {
            const Trajectory* anchor = by_id.at(c.anchor_id);
            const Trajectory* swing = by_id.at(c.swing_id);
            auto desc = compute_descriptor(*anchor, *swing, c.start_frame, cfg.n);
            if (!desc) {
                continue;  // rigid pair
            }
            PoTRecord rec;
            rec.shot_id = shot.shot_id;
            rec.start_frame = c.start_frame;
            rec.anchor_id = c.anchor_id;
            rec.swing_id = c.swing_id;
            rec.score = c.score;
            rec.descriptor = std::move(*desc);
            out.push_back(std::move(rec));
        }
    }
    return out;
}

std::vector<TsRecord> extract_ts(const Shot& shot, const SelectionConfig& cfg) {
    std::vector<TsRecord> out;
    for (const auto& t : shot.trajectories) {
        for (int f = t.start_frame; f + cfg.n <= t.end_frame(); ++f) {
            bool fg_ok = true;
            for (int k = f; k < f + cfg.n; ++k) {
                if (!t.fg_at(k)) {
                    fg_ok = false;
                    break;
                }
            }
            if (!fg_ok) {
                continue;
            }
            auto desc = compute_ts_descriptor(t, f, cfg.n);
            if (!desc) {
                continue;
            }
            TsRecord rec;
            rec.shot_id = shot.shot_id;
            rec.start_frame = f;
            rec.traj_id = t.id;
            rec.descriptor = std::move(*desc);
            out.push_back(std::move(rec));
        }
    }
    return out;
}

void write_pot_dump(const std::vector<PoTRecord>& pots, std::ostream& out) {
    std::string line;
    for (const auto& p : pots) {
        line = "pot " + std::to_string(p.shot_id) + ' ' + std::to_string(p.start_frame) + ' ' +
               std::to_string(p.anchor_id) + ' ' + std::to_string(p.swing_id);
        append_double(line, p.score);
        append_double(line, p.descriptor.theta);
        for (const Vec2& d : p.descriptor.displacements) {
            append_double(line, d.x);
            append_double(line, d.y);
        }
        line += '\n';
        out << line;
    }
}

void save_pot_dump(const std::vector<PoTRecord>& pots, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    write_pot_dump(pots, out);
}

std::vector<PoTRecord> load_pot_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open pot dump: " + path);
    }
    std::vector<PoTRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag != "pot") {
            throw ParseError(path, lineno, "expected 'pot' record, got '" + tag + "'");
        }
        PoTRecord rec;
        if (!(ss >> rec.shot_id >> rec.start_frame >> rec.anchor_id >> rec.swing_id >> rec.score >>
              rec.descriptor.theta)) {
            throw ParseError(path, lineno, "truncated pot record");
        }
        double x, y;
        while (ss >> x >> y) {
            rec.descriptor.displacements.emplace_back(x, y);
        }
        if (rec.descriptor.displacements.empty()) {
            throw ParseError(path, lineno, "pot record without displacement vectors");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void write_ts_dump(const std::vector<TsRecord>& ts, std::ostream& out) {
    std::string line;
    for (const auto& t : ts) {
        line = "ts " + std::to_string(t.shot_id) + ' ' + std::to_string(t.start_frame) + ' ' +
               std::to_string(t.traj_id);
        for (double v : t.descriptor) {
            append_double(line, v);
        }
        line += '\n';
        out << line;
    }
}

void save_ts_dump(const std::vector<TsRecord>& ts, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    write_ts_dump(ts, out);
}

std::vector<TsRecord> load_ts_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open ts dump: " + path);
    }
    std::vector<TsRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag != "ts") {
            throw ParseError(path, lineno, "expected 'ts' record, got '" + tag + "'");
        }
        TsRecord rec;
        if (!(ss >> rec.shot_id >> rec.start_frame >> rec.traj_id)) {
            throw ParseError(path, lineno, "truncated ts record");
        }
        double v;
        while (ss >> v) {
            rec.descriptor.push_back(v);
        }
        if (rec.descriptor.empty()) {
            throw ParseError(path, lineno, "ts record without components");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace potminer
