#include "potminer/cluster.hpp"
#include "potminer/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

using namespace potminer;

namespace {

BoWHistogram hist(std::vector<double> w) {
    BoWHistogram h;
    h.weights = std::move(w);
    return h;
}

BoWHistogram random_hist(int k, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(k));
    double sum = 0;
    for (double& v : w) {
        v = rng.next_double();
        sum += v;
    }
    for (double& v : w) v /= sum;
    return hist(std::move(w));
}

// Independent complete-linkage reference: cluster distances recomputed
// from the original matrix by scanning all leaf pairs, no cached updates.
struct NaiveResult {
    std::vector<Dendrogram::Merge> merges;
    std::vector<std::vector<int>> members_at_k(int n, int k) const {
        std::vector<std::vector<int>> clusters;
        for (int i = 0; i < n; ++i) clusters.push_back({i});
        std::vector<int> ids(static_cast<std::size_t>(n));
        std::iota(ids.begin(), ids.end(), 0);
        for (int m = 0; m < n - k; ++m) {
            const auto& mg = merges[static_cast<std::size_t>(m)];
            int ia = -1, ib = -1;
            for (std::size_t c = 0; c < ids.size(); ++c) {
                if (ids[c] == mg.a) ia = static_cast<int>(c);
                if (ids[c] == mg.b) ib = static_cast<int>(c);
            }
            clusters[static_cast<std::size_t>(ia)].insert(clusters[static_cast<std::size_t>(ia)].end(),
                                                          clusters[static_cast<std::size_t>(ib)].begin(),
                                                          clusters[static_cast<std::size_t>(ib)].end());
            ids[static_cast<std::size_t>(ia)] = n + m;
            clusters.erase(clusters.begin() + ib);
            ids.erase(ids.begin() + ib);
        }
        return clusters;
    }
};

NaiveResult naive_complete_linkage(const DistanceMatrix& dist) {
    const int n = dist.n;
    NaiveResult out;
    std::vector<std::vector<int>> members;
    std::vector<int> ids;
    for (int i = 0; i < n; ++i) {
        members.push_back({i});
        ids.push_back(i);
    }
    for (int step = 0; step < n - 1; ++step) {
        double best = 1e300;
        std::size_t bi = 0, bj = 0;
        int blo = -1, bhi = -1;
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                double worst = -1e300;
                for (int a : members[i]) {
                    for (int b : members[j]) {
                        worst = std::max(worst, dist.at(a, b));
                    }
                }
                const int lo = std::min(ids[i], ids[j]);
                const int hi = std::max(ids[i], ids[j]);
                bool better = worst < best;
                if (!better && worst == best && blo >= 0) {
                    better = lo < blo || (lo == blo && hi < bhi);
                }
                if (better) {
                    best = worst;
                    bi = i;
                    bj = j;
                    blo = lo;
                    bhi = hi;
                }
            }
        }
        Dendrogram::Merge m;
        m.a = std::min(ids[bi], ids[bj]);
        m.b = std::max(ids[bi], ids[bj]);
        m.height = best;
        out.merges.push_back(m);
        members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
        ids[bi] = n + step;
        members.erase(members.begin() + static_cast<std::ptrdiff_t>(bj));
        ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    return out;
}

DistanceMatrix random_distance_matrix(int n, Rng& rng) {
    DistanceMatrix m;
    m.n = n;
    m.values.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double v = rng.next_uniform(0.0, 1.0);
            m.at(i, j) = v;
            m.at(j, i) = v;
        }
    }
    return m;
}

std::vector<int> normalize_partition(const std::vector<std::vector<int>>& clusters, int n) {
    std::vector<std::vector<int>> sorted = clusters;
    for (auto& c : sorted) std::sort(c.begin(), c.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    for (std::size_t c = 0; c < sorted.size(); ++c) {
        for (int leaf : sorted[c]) {
            labels[static_cast<std::size_t>(leaf)] = static_cast<int>(c);
        }
    }
    return labels;
}

}  // namespace

TEST_CASE("interval distance values") {
    const auto a = hist({0.5, 0.5, 0.0});
    const auto b = hist({0.0, 0.0, 1.0});
    const auto c = hist({0.25, 0.25, 0.5});

    CHECK(interval_distance(a, a) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(interval_distance(a, b) == doctest::Approx(-std::exp(-1.0)).epsilon(1e-12));
    // HI(a, c) = 0.25 + 0.25 + 0 = 0.5
    CHECK(interval_distance(a, c) == doctest::Approx(-std::exp(-0.5)).epsilon(1e-12));
    CHECK(interval_distance(a, c) == interval_distance(c, a));

    BoWHistogram e;
    e.weights = {0, 0, 0};
    e.empty = true;
    CHECK_THROWS_AS(interval_distance(a, e), std::invalid_argument);
}

TEST_CASE("interval distance is strictly decreasing in HI") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const auto u = random_hist(8, rng);
        const auto v = random_hist(8, rng);
        const auto w = random_hist(8, rng);
        const double hi_uv = histogram_intersection(u, v);
        const double hi_uw = histogram_intersection(u, w);
        if (hi_uv > hi_uw) {
            CHECK(interval_distance(u, v) < interval_distance(u, w));
        } else if (hi_uw > hi_uv) {
            CHECK(interval_distance(u, w) < interval_distance(u, v));
        }
    }
}

TEST_CASE("multichannel distance") {
    const auto a = hist({0.5, 0.5});
    const auto b = hist({0.2, 0.8});

    SUBCASE("single channel with A = 1 reduces to Eq. 3") {
        DistanceConfig cfg;
        cfg.channels = {"pot"};
        cfg.channel_norms = {1.0};
        CHECK(multichannel_distance({a}, {b}, cfg) ==
              doctest::Approx(interval_distance(a, b)).epsilon(1e-12));
    }
    SUBCASE("identical intervals across channels give -1") {
        DistanceConfig cfg;
        cfg.channels = {"pot", "ts"};
        cfg.channel_norms = {0.3, 0.7};
        CHECK(multichannel_distance({a, b}, {a, b}, cfg) == doctest::Approx(-1.0).epsilon(1e-12));
    }
    SUBCASE("hand-evaluated two-channel case") {
        // (1 - HI) = (0.2, 0.6), A = (0.4, 0.5) -> -exp(-(0.5 + 1.2))
        const auto u1 = hist({0.8, 0.2});
        const auto v1 = hist({1.0, 0.0});  // HI = 0.8
        const auto u2 = hist({0.4, 0.6});
        const auto v2 = hist({1.0, 0.0});  // HI = 0.4
        DistanceConfig cfg;
        cfg.channels = {"c1", "c2"};
        cfg.channel_norms = {0.4, 0.5};
        CHECK(multichannel_distance({u1, u2}, {v1, v2}, cfg) ==
              doctest::Approx(-std::exp(-1.7)).epsilon(1e-12));
    }
    SUBCASE("channel mismatch is an error") {
        DistanceConfig cfg;
        cfg.channels = {"c1", "c2"};
        cfg.channel_norms = {0.4, 0.5};
        CHECK_THROWS_AS(multichannel_distance({a}, {b}, cfg), std::invalid_argument);
    }
    SUBCASE("zero-variation channel rejected") {
        std::vector<std::vector<BoWHistogram>> bows = {{a, a, a}};
        CHECK_THROWS_AS(compute_channel_norms(bows), std::invalid_argument);
    }
}

TEST_CASE("hierarchical clustering: degenerate cuts") {
    Rng rng(7);
    const auto m = random_distance_matrix(6, rng);
    const auto dendro = hierarchical_cluster(m);
    REQUIRE(dendro.merges.size() == 5);

    const auto all_separate = cut_dendrogram(dendro, 6);
    for (int i = 0; i < 6; ++i) {
        CHECK(all_separate[static_cast<std::size_t>(i)] == i);
    }
    const auto single = cut_dendrogram(dendro, 1);
    for (int label : single) {
        CHECK(label == 0);
    }
}

TEST_CASE("hierarchical clustering matches the naive reference") {
    Rng rng(99);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 3 + static_cast<int>(rng.next_index(10));
        const auto m = random_distance_matrix(n, rng);
        const auto dendro = hierarchical_cluster(m);
        const auto naive = naive_complete_linkage(m);
        REQUIRE(dendro.merges.size() == naive.merges.size());
        for (std::size_t i = 0; i < naive.merges.size(); ++i) {
            CHECK(dendro.merges[i].a == naive.merges[i].a);
            CHECK(dendro.merges[i].b == naive.merges[i].b);
            CHECK(dendro.merges[i].height == doctest::Approx(naive.merges[i].height).epsilon(1e-12));
        }
        // Heights never decrease.
        for (std::size_t i = 1; i < dendro.merges.size(); ++i) {
            CHECK(dendro.merges[i].height >= dendro.merges[i - 1].height - 1e-12);
        }
        // Cuts agree as partitions for every k.
        for (int k = 1; k <= n; ++k) {
            const auto mine = cut_dendrogram(dendro, k);
            const auto ref = normalize_partition(naive.members_at_k(n, k), n);
            CHECK(mine == ref);
        }
    }
}

TEST_CASE("monotone transform of the dissimilarity keeps the topology") {
    Rng rng(11);
    std::vector<BoWHistogram> bows;
    for (int i = 0; i < 10; ++i) {
        bows.push_back(random_hist(6, rng));
    }
    const auto d_exp = distance_matrix(bows);
    DistanceMatrix d_lin = d_exp;
    for (double& v : d_lin.values) {
        // invert -exp(-(1-HI)) back to (1-HI)
        v = -std::log(-v);
    }
    const auto t_exp = hierarchical_cluster(d_exp);
    const auto t_lin = hierarchical_cluster(d_lin);
    REQUIRE(t_exp.merges.size() == t_lin.merges.size());
    for (std::size_t i = 0; i < t_exp.merges.size(); ++i) {
        CHECK(t_exp.merges[i].a == t_lin.merges[i].a);
        CHECK(t_exp.merges[i].b == t_lin.merges[i].b);
    }
}

TEST_CASE("nesting: cutting at k and k-1 differ by exactly one merge") {
    Rng rng(13);
    const int n = 12;
    const auto m = random_distance_matrix(n, rng);
    const auto dendro = hierarchical_cluster(m);
    for (int k = n; k >= 2; --k) {
        const auto fine = cut_dendrogram(dendro, k);
        const auto coarse = cut_dendrogram(dendro, k - 1);
        // Count coarse clusters that are unions of >1 fine cluster.
        std::map<int, std::vector<int>> coarse_to_fine;
        for (int i = 0; i < n; ++i) {
            coarse_to_fine[coarse[static_cast<std::size_t>(i)]].push_back(
                fine[static_cast<std::size_t>(i)]);
        }
        int multi = 0;
        for (auto& [c, fs] : coarse_to_fine) {
            std::sort(fs.begin(), fs.end());
            fs.erase(std::unique(fs.begin(), fs.end()), fs.end());
            if (fs.size() > 1) {
                CHECK(fs.size() == 2);
                ++multi;
            }
        }
        CHECK(multi == 1);
    }
}

TEST_CASE("asymmetric matrix is rejected") {
    DistanceMatrix m;
    m.n = 3;
    m.values = {0, 1, 2, 1, 0, 3, 2, 3.1, 0};
    CHECK_THROWS_AS(hierarchical_cluster(m), std::invalid_argument);
}

TEST_CASE("row-order permutation maps to the same partition") {
    Rng rng(17);
    const int n = 9;
    std::vector<BoWHistogram> bows;
    for (int i = 0; i < n; ++i) {
        bows.push_back(random_hist(5, rng));
    }
    std::vector<std::size_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(perm[i], perm[rng.next_index(i + 1)]);
    }
    std::vector<BoWHistogram> permuted;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        permuted.push_back(bows[perm[i]]);
    }
    const auto base_labels = cut_dendrogram(hierarchical_cluster(distance_matrix(bows)), 3);
    const auto perm_labels = cut_dendrogram(hierarchical_cluster(distance_matrix(permuted)), 3);
    // Same partition after mapping indices back.
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const bool same_base = base_labels[perm[static_cast<std::size_t>(i)]] ==
                                   base_labels[perm[static_cast<std::size_t>(j)]];
            const bool same_perm = perm_labels[static_cast<std::size_t>(i)] ==
                                   perm_labels[static_cast<std::size_t>(j)];
            CHECK(same_base == same_perm);
        }
    }
    // And serial matches parallel matrices bit-exactly.
    const auto mp = distance_matrix(bows);
    const auto ms = distance_matrix_serial(bows);
    CHECK(mp.values == ms.values);
}

TEST_CASE("cluster file round trip") {
    ClusterFile cf;
    cf.dendrogram.leaf_count = 4;
    cf.dendrogram.merges = {{0, 2, -0.9}, {1, 4, -0.8}, {3, 5, -0.4}};
    cf.assignments = {{0, 0}, {1, 0}, {2, 1}, {3, 1}};
    cf.empty_intervals = {4, 7};
    const std::string path = "/tmp/potminer_test.clusters";
    save_clusters(cf, path);
    const auto back = load_clusters(path);
    REQUIRE(back.dendrogram.merges.size() == 3);
    CHECK(back.dendrogram.leaf_count == 4);
    CHECK(back.dendrogram.merges[0].a == 0);
    CHECK(back.dendrogram.merges[0].b == 2);
    CHECK(back.dendrogram.merges[0].height == -0.9);
    CHECK(back.assignments == cf.assignments);
    CHECK(back.empty_intervals == cf.empty_intervals);
}
