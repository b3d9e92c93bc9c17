#pragma once

#include "potminer/codebook.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace potminer {

double histogram_intersection(const BoWHistogram& a, const BoWHistogram& b);

/// -exp(-(1 - HI)), in [-1, -1/e]; -1 iff the histograms coincide.
/// Throws on empty-flagged inputs: drop PoT-free intervals first.
double interval_distance(const BoWHistogram& u, const BoWHistogram& v);

struct DistanceConfig {
    std::vector<std::string> channels;
    std::vector<double> channel_norms;  // A_i, average (1 - HI_i) over all pairs

    void validate() const;
};

/// -exp(-sum_i (1 - HI_i) / A_i) over the configured channels.
double multichannel_distance(const std::vector<BoWHistogram>& u,
                             const std::vector<BoWHistogram>& v, const DistanceConfig& cfg);

/// A_i per channel over all unordered pairs; throws if a channel has no
/// variation (A_i = 0), since Eq. 4 divides by it.
std::vector<double> compute_channel_norms(
    const std::vector<std::vector<BoWHistogram>>& bows_per_channel);

struct DistanceMatrix {
    int n = 0;
    std::vector<double> values;  // n x n, row-major

    double at(int i, int j) const {
        return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                      static_cast<std::size_t>(j)];
    }
    double& at(int i, int j) {
        return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                      static_cast<std::size_t>(j)];
    }
};

DistanceMatrix distance_matrix(const std::vector<BoWHistogram>& bows);
DistanceMatrix distance_matrix_serial(const std::vector<BoWHistogram>& bows);
DistanceMatrix multichannel_distance_matrix(
    const std::vector<std::vector<BoWHistogram>>& bows_per_channel, const DistanceConfig& cfg);

/// Agglomerative merge tree. Leaves are 0..leaf_count-1; the cluster made
/// by merge m gets id leaf_count + m. Heights are non-decreasing.
struct Dendrogram {
    struct Merge {
        int a = 0;
        int b = 0;  // a < b, cluster ids
        double height = 0.0;
    };
    int leaf_count = 0;
    std::vector<Merge> merges;
};

/// Complete-linkage agglomeration over a symmetric distance matrix.
/// Merge ties break on the smallest (a, b) cluster-id pair. Throws if the
/// matrix is asymmetric beyond 1e-9.
Dendrogram hierarchical_cluster(const DistanceMatrix& dist);

/// Labels for k clusters; cluster ids are assigned 0..k-1 in order of each
/// cluster's smallest leaf index, so equal partitions get equal labels.
std::vector<int> cut_dendrogram(const Dendrogram& dendrogram, int k);

// --- cluster file -------------------------------------------------------
// merge <a> <b> <height>        (leaf_count - 1 lines, merge order)
// cluster <interval_index> <cluster_id>
// empty <interval_index>        (intervals excluded for empty BoWs)

struct ClusterFile {
    Dendrogram dendrogram;
    std::vector<std::pair<int, int>> assignments;
    std::vector<int> empty_intervals;
};

void write_clusters(const ClusterFile& cf, std::ostream& out);
void save_clusters(const ClusterFile& cf, const std::string& path);
ClusterFile load_clusters(const std::string& path);

}  // namespace potminer
