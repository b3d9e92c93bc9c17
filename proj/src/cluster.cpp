#include "potminer/cluster.hpp"

#include "potminer/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace potminer {

double histogram_intersection(const BoWHistogram& a, const BoWHistogram& b) {
    if (a.weights.size() != b.weights.size()) {
        throw std::invalid_argument("histogram_intersection: length mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
        acc += std::min(a.weights[i], b.weights[i]);
    }
    return acc;
}

double interval_distance(const BoWHistogram& u, const BoWHistogram& v) {
    if (u.empty || v.empty) {
        throw std::invalid_argument("interval_distance: empty-flagged histogram");
    }
    return -std::exp(-(1.0 - histogram_intersection(u, v)));
}

void DistanceConfig::validate() const {
    if (channels.empty()) {
        throw std::invalid_argument("distance config: no channels");
    }
    if (channels.size() != channel_norms.size()) {
        throw std::invalid_argument("distance config: channels/norms size mismatch");
    }
    for (std::size_t i = 0; i < channel_norms.size(); ++i) {
        if (!(channel_norms[i] > 0.0)) {
            throw std::invalid_argument("distance config: channel '" + channels[i] +
                                        "' has non-positive norm A_i");
        }
    }
}

double multichannel_distance(const std::vector<BoWHistogram>& u,
                             const std::vector<BoWHistogram>& v, const DistanceConfig& cfg) {
    cfg.validate();
    if (u.size() != cfg.channels.size() || v.size() != cfg.channels.size()) {
        throw std::invalid_argument("multichannel_distance: channel count mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        acc += (1.0 - histogram_intersection(u[i], v[i])) / cfg.channel_norms[i];
    }
    return -std::exp(-acc);
}

std::vector<double> compute_channel_norms(
    const std::vector<std::vector<BoWHistogram>>& bows_per_channel) {
    std::vector<double> norms;
    for (std::size_t c = 0; c < bows_per_channel.size(); ++c) {
        const auto& bows = bows_per_channel[c];
        const std::size_t n = bows.size();
        if (n < 2) {
            throw std::invalid_argument("compute_channel_norms: need at least 2 intervals");
        }
        double acc = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                acc += 1.0 - histogram_intersection(bows[i], bows[j]);
                ++pairs;
            }
        }
        const double a = acc / static_cast<double>(pairs);
        if (!(a > 0.0)) {
            throw std::invalid_argument("compute_channel_norms: channel " + std::to_string(c) +
                                        " has zero variation across intervals");
        }
        norms.push_back(a);
    }
    return norms;
}

namespace {

DistanceMatrix matrix_impl(const std::vector<BoWHistogram>& bows, bool parallel) {
    DistanceMatrix m;
    m.n = static_cast<int>(bows.size());
    m.values.assign(static_cast<std::size_t>(m.n) * static_cast<std::size_t>(m.n), 0.0);
    const int n = m.n;
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 4)
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double d = interval_distance(bows[static_cast<std::size_t>(i)],
                                                   bows[static_cast<std::size_t>(j)]);
                m.at(i, j) = d;
            }
            m.at(i, i) = -1.0;  // HI(x, x) = 1
        }
    } else {
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                m.at(i, j) = interval_distance(bows[static_cast<std::size_t>(i)],
                                               bows[static_cast<std::size_t>(j)]);
            }
            m.at(i, i) = -1.0;
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            m.at(j, i) = m.at(i, j);
        }
    }
    return m;
}

}  // namespace

DistanceMatrix distance_matrix(const std::vector<BoWHistogram>& bows) {
    return matrix_impl(bows, true);
}

DistanceMatrix distance_matrix_serial(const std::vector<BoWHistogram>& bows) {
    return matrix_impl(bows, false);
}

DistanceMatrix multichannel_distance_matrix(
    const std::vector<std::vector<BoWHistogram>>& bows_per_channel, const DistanceConfig& cfg) {
    cfg.validate();
    if (bows_per_channel.size() != cfg.channels.size()) {
        throw std::invalid_argument("multichannel_distance_matrix: channel count mismatch");
    }
    const int n = static_cast<int>(bows_per_channel.front().size());
    for (const auto& ch : bows_per_channel) {
        if (static_cast<int>(ch.size()) != n) {
            throw std::invalid_argument("multichannel_distance_matrix: ragged channels");
        }
    }
    DistanceMatrix m;
    m.n = n;
    m.values.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < bows_per_channel.size(); ++c) {
                acc += (1.0 - histogram_intersection(bows_per_channel[c][static_cast<std::size_t>(i)],
                                                     bows_per_channel[c][static_cast<std::size_t>(j)])) /
                       cfg.channel_norms[c];
            }
            m.at(i, j) = -std::exp(-acc);
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            m.at(j, i) = m.at(i, j);
        }
    }
    return m;
}

Dendrogram hierarchical_cluster(const DistanceMatrix& dist) {
    const int n = dist.n;
    if (n < 1) {
        throw std::invalid_argument("hierarchical_cluster: empty matrix");
    }
    if (static_cast<std::size_t>(n) * static_cast<std::size_t>(n) != dist.values.size()) {
        throw std::invalid_argument("hierarchical_cluster: matrix is not square");
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (std::abs(dist.at(i, j) - dist.at(j, i)) > 1e-9) {
                throw std::invalid_argument("hierarchical_cluster: matrix asymmetric at (" +
                                            std::to_string(i) + ", " + std::to_string(j) + ")");
            }
        }
    }

    Dendrogram out;
    out.leaf_count = n;
    if (n == 1) {
        return out;
    }

    // Compact active-cluster matrix, updated with the complete-linkage
    // (max) rule on every merge.
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    DistanceMatrix d = dist;
    int active = n;

    for (int step = 0; step < n - 1; ++step) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;  // compact indices, (ids) lexicographic tie-break
        for (int i = 0; i < active; ++i) {
            for (int j = i + 1; j < active; ++j) {
                const double v = d.at(i, j);
                const int lo = std::min(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
                const int hi = std::max(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
                bool better = v < best;
                if (!better && v == best && bi >= 0) {
                    const int blo = std::min(ids[static_cast<std::size_t>(bi)], ids[static_cast<std::size_t>(bj)]);
                    const int bhi = std::max(ids[static_cast<std::size_t>(bi)], ids[static_cast<std::size_t>(bj)]);
                    better = lo < blo || (lo == blo && hi < bhi);
                }
                if (better) {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        Dendrogram::Merge merge;
        merge.a = std::min(ids[static_cast<std::size_t>(bi)], ids[static_cast<std::size_t>(bj)]);
        merge.b = std::max(ids[static_cast<std::size_t>(bi)], ids[static_cast<std::size_t>(bj)]);
        merge.height = best;
        out.merges.push_back(merge);

        // Row bi becomes the merged cluster; row bj is swapped out.
        for (int c = 0; c < active; ++c) {
            if (c == bi || c == bj) {
                continue;
            }
            const double v = std::max(d.at(bi, c), d.at(bj, c));
            d.at(bi, c) = v;
            d.at(c, bi) = v;
        }
        ids[static_cast<std::size_t>(bi)] = n + step;
        const int last = active - 1;
        if (bj != last) {
            for (int c = 0; c < active; ++c) {
                d.at(bj, c) = d.at(last, c);
                d.at(c, bj) = d.at(c, last);
            }
            d.at(bj, bj) = d.at(last, last);
            ids[static_cast<std::size_t>(bj)] = ids[static_cast<std::size_t>(last)];
        }
        --active;
    }
    return out;
}

std::vector<int> cut_dendrogram(const Dendrogram& dendrogram, int k) {
    const int n = dendrogram.leaf_count;
    if (k < 1 || k > n) {
        throw std::invalid_argument("cut_dendrogram: k must be in [1, leaf_count]");
    }
    // Union-find over the first n - k merges.
    std::vector<int> parent(static_cast<std::size_t>(2 * n - 1));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (int m = 0; m < n - k; ++m) {
        const auto& merge = dendrogram.merges[static_cast<std::size_t>(m)];
        const int target = n + m;
        parent[static_cast<std::size_t>(find(merge.a))] = target;
        parent[static_cast<std::size_t>(find(merge.b))] = target;
    }
    // Normalize: clusters numbered by their smallest leaf.
    std::vector<int> root_to_label(static_cast<std::size_t>(2 * n - 1), -1);
    std::vector<int> labels(static_cast<std::size_t>(n));
    int next = 0;
    for (int leaf = 0; leaf < n; ++leaf) {
        const int r = find(leaf);
        if (root_to_label[static_cast<std::size_t>(r)] < 0) {
            root_to_label[static_cast<std::size_t>(r)] = next++;
        }
        labels[static_cast<std::size_t>(leaf)] = root_to_label[static_cast<std::size_t>(r)];
    }
    return labels;
}

void write_clusters(const ClusterFile& cf, std::ostream& out) {
    char buf[40];
    for (const auto& m : cf.dendrogram.merges) {
        std::snprintf(buf, sizeof(buf), "%.17g", m.height);
        out << "merge " << m.a << ' ' << m.b << ' ' << buf << '\n';
    }
    for (const auto& [idx, cid] : cf.assignments) {
        out << "cluster " << idx << ' ' << cid << '\n';
    }
    for (int idx : cf.empty_intervals) {
        out << "empty " << idx << '\n';
    }
}

void save_clusters(const ClusterFile& cf, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    write_clusters(cf, out);
}

ClusterFile load_clusters(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open clusters file: " + path);
    }
    ClusterFile cf;
    std::string line;
    std::size_t lineno = 0;
    int max_id = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "merge") {
            Dendrogram::Merge m;
            if (!(ss >> m.a >> m.b >> m.height)) {
                throw ParseError(path, lineno, "bad merge record");
            }
            cf.dendrogram.merges.push_back(m);
            max_id = std::max(max_id, std::max(m.a, m.b));
        } else if (tag == "cluster") {
            int idx, cid;
            if (!(ss >> idx >> cid)) {
                throw ParseError(path, lineno, "bad cluster record");
            }
            cf.assignments.emplace_back(idx, cid);
        } else if (tag == "empty") {
            int idx;
            if (!(ss >> idx)) {
                throw ParseError(path, lineno, "bad empty record");
            }
            cf.empty_intervals.push_back(idx);
        } else {
            throw ParseError(path, lineno, "unknown record tag '" + tag + "'");
        }
    }
    cf.dendrogram.leaf_count = static_cast<int>(cf.dendrogram.merges.size()) + 1;
    if (cf.dendrogram.merges.empty() && !cf.assignments.empty()) {
        cf.dendrogram.leaf_count = static_cast<int>(cf.assignments.size());
    }
    return cf;
}

}  // namespace potminer
