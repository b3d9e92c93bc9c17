#include "potminer/evalmetrics.hpp"

#include "potminer/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace potminer {

namespace {

std::vector<int> to_ids(const std::vector<std::string>& labels) {
    std::unordered_map<std::string, int> ids;
    std::vector<int> out;
    out.reserve(labels.size());
    for (const auto& l : labels) {
        const auto [it, inserted] = ids.emplace(l, static_cast<int>(ids.size()));
        out.push_back(it->second);
    }
    return out;
}

double binom2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double purity(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.empty() || pred.size() != truth.size()) {
        throw std::invalid_argument("purity: inputs must be non-empty and equal length");
    }
    std::unordered_map<int, std::unordered_map<int, int>> per_cluster;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ++per_cluster[pred[i]][truth[i]];
    }
    long correct = 0;
    for (const auto& [cluster, counts] : per_cluster) {
        int best = 0;
        for (const auto& [label, count] : counts) {
            best = std::max(best, count);
        }
        correct += best;
    }
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double purity(const std::vector<int>& pred, const std::vector<std::string>& truth) {
    return purity(pred, to_ids(truth));
}

double adjusted_rand_index(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.empty() || pred.size() != truth.size()) {
        throw std::invalid_argument("adjusted_rand_index: inputs must be non-empty and equal length");
    }
    std::unordered_map<int, std::unordered_map<int, int>> table;
    std::unordered_map<int, int> row_sums, col_sums;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ++table[pred[i]][truth[i]];
        ++row_sums[pred[i]];
        ++col_sums[truth[i]];
    }
    double index = 0.0;
    for (const auto& [r, cols] : table) {
        for (const auto& [c, n] : cols) {
            index += binom2(n);
        }
    }
    double sum_a = 0.0, sum_b = 0.0;
    for (const auto& [r, n] : row_sums) {
        sum_a += binom2(n);
    }
    for (const auto& [c, n] : col_sums) {
        sum_b += binom2(n);
    }
    // Two degenerate partitions that agree perfectly (all singletons, or
    // one all-in cluster each) score 1; otherwise the vanishing
    // adjustment denominator means chance-level agreement, scored 0.
    const std::size_t n = pred.size();
    const std::size_t cp = row_sums.size();
    const std::size_t ct = col_sums.size();
    if (cp == ct && (cp == 1 || cp == n)) {
        return 1.0;
    }
    const double total_pairs = binom2(static_cast<double>(n));
    if (total_pairs <= 0.0) {
        return 0.0;
    }
    const double expected = sum_a * sum_b / total_pairs;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) {
        return 0.0;
    }
    return (index - expected) / (max_index - expected);
}

double adjusted_rand_index(const std::vector<int>& pred, const std::vector<std::string>& truth) {
    return adjusted_rand_index(pred, to_ids(truth));
}

std::string majority_label(const Interval& interval, const std::vector<std::string>& frame_labels) {
    if (interval.start_frame < 0 ||
        interval.end_frame > static_cast<int>(frame_labels.size()) ||
        interval.length() <= 0) {
        throw std::invalid_argument("majority_label: interval outside the labeled range");
    }
    std::unordered_map<std::string, int> counts;
    std::unordered_map<std::string, int> first_seen;
    for (int f = interval.start_frame; f < interval.end_frame; ++f) {
        const auto& l = frame_labels[static_cast<std::size_t>(f)];
        ++counts[l];
        first_seen.emplace(l, f);
    }
    std::string best;
    int best_count = -1;
    int best_first = 0;
    for (const auto& [label, count] : counts) {
        const int first = first_seen[label];
        if (count > best_count || (count == best_count && first < best_first)) {
            best = label;
            best_count = count;
            best_first = first;
        }
    }
    return best;
}

double interval_uniformity(const Interval& interval, const std::vector<std::string>& frame_labels) {
    const std::string top = majority_label(interval, frame_labels);
    int count = 0;
    for (int f = interval.start_frame; f < interval.end_frame; ++f) {
        if (frame_labels[static_cast<std::size_t>(f)] == top) {
            ++count;
        }
    }
    return static_cast<double>(count) / static_cast<double>(interval.length());
}

std::map<std::string, int> count_intervals_per_behavior(const std::vector<Interval>& intervals,
                                                        const std::vector<std::string>& labels) {
    if (intervals.size() != labels.size()) {
        throw std::invalid_argument("count_intervals_per_behavior: size mismatch");
    }
    std::map<std::string, std::vector<int>> shots_per_behavior;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        shots_per_behavior[labels[i]].push_back(intervals[i].shot_id);
    }
    std::map<std::string, int> out;
    for (auto& [behavior, shots] : shots_per_behavior) {
        std::sort(shots.begin(), shots.end());
        shots.erase(std::unique(shots.begin(), shots.end()), shots.end());
        out[behavior] = static_cast<int>(shots.size());
    }
    return out;
}

LabeledIntervalSet build_labeled_set(const std::vector<Interval>& intervals,
                                     const std::vector<std::pair<int, int>>& assignments,
                                     const Dataset& dataset) {
    std::unordered_map<int, const Shot*> shots;
    for (const auto& s : dataset) {
        shots.emplace(s.shot_id, &s);
    }
    LabeledIntervalSet out;
    for (const auto& [idx, cluster] : assignments) {
        if (idx < 0 || idx >= static_cast<int>(intervals.size())) {
            throw std::invalid_argument("build_labeled_set: assignment index " +
                                        std::to_string(idx) + " out of range");
        }
        const Interval& iv = intervals[static_cast<std::size_t>(idx)];
        const auto it = shots.find(iv.shot_id);
        if (it == shots.end()) {
            throw std::invalid_argument("build_labeled_set: unknown shot " +
                                        std::to_string(iv.shot_id));
        }
        if (!it->second->frame_labels) {
            throw std::invalid_argument("build_labeled_set: shot " + std::to_string(iv.shot_id) +
                                        " has no frame labels");
        }
        out.intervals.push_back(iv);
        out.predicted.push_back(cluster);
        out.truth.push_back(majority_label(iv, *it->second->frame_labels));
    }
    return out;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
    out << "k,purity,ari,num_intervals,uniformity\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%d,%.6f\n", r.k, r.purity, r.ari,
                      r.num_intervals, r.uniformity);
        out << buf;
    }
}

void save_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    write_metrics_csv(rows, out);
}

std::vector<MetricsRow> load_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open metrics file: " + path);
    }
    std::vector<MetricsRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) {
            continue;  // header
        }
        MetricsRow r;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%d,%lf", &r.k, &r.purity, &r.ari,
                        &r.num_intervals, &r.uniformity) != 5) {
            throw ParseError(path, lineno, "bad metrics row");
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace potminer
