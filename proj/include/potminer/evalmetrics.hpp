#pragma once

#include "potminer/partition.hpp"
#include "potminer/trajectory.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace potminer {

/// Fraction of items whose cluster's most frequent truth label matches
/// their own. Throws on empty input.
double purity(const std::vector<int>& pred, const std::vector<int>& truth);
double purity(const std::vector<int>& pred, const std::vector<std::string>& truth);

/// Hubert-Arabie adjusted Rand index from the contingency table; 0 when
/// the adjustment denominator vanishes.
double adjusted_rand_index(const std::vector<int>& pred, const std::vector<int>& truth);
double adjusted_rand_index(const std::vector<int>& pred, const std::vector<std::string>& truth);

/// Most frequent frame label inside the interval; ties go to the label
/// whose first occurrence in the interval is earliest.
std::string majority_label(const Interval& interval, const std::vector<std::string>& frame_labels);

/// Count of the most frequent label divided by the interval length.
double interval_uniformity(const Interval& interval, const std::vector<std::string>& frame_labels);

/// Per behavior, the number of distinct shots contributing at least one
/// interval with that majority label.
std::map<std::string, int> count_intervals_per_behavior(const std::vector<Interval>& intervals,
                                                        const std::vector<std::string>& labels);

/// Intervals with predictions and majority-frame truth labels, ready for
/// purity/ARI. Built by joining intervals, cluster assignments and the
/// labeled dataset.
struct LabeledIntervalSet {
    std::vector<Interval> intervals;
    std::vector<int> predicted;
    std::vector<std::string> truth;
};

LabeledIntervalSet build_labeled_set(const std::vector<Interval>& intervals,
                                     const std::vector<std::pair<int, int>>& assignments,
                                     const Dataset& dataset);

struct MetricsRow {
    int k = 0;
    double purity = 0.0;
    double ari = 0.0;
    int num_intervals = 0;
    double uniformity = 0.0;
};

// CSV: k,purity,ari,num_intervals,uniformity
void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out);
void save_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);
std::vector<MetricsRow> load_metrics_csv(const std::string& path);

}  // namespace potminer
