#include "potminer/cluster.hpp"
#include "potminer/evalmetrics.hpp"
#include "potminer/rng.hpp"

#include <doctest.h>

#include <algorithm>

using namespace potminer;

namespace {

// Independent ARI oracle: enumerate all item pairs and chance-correct the
// Rand index from the four pair-agreement counts.
double ari_pair_enumeration(const std::vector<int>& pred, const std::vector<int>& truth) {
    const std::size_t n = pred.size();
    double n11 = 0, n00 = 0, n10 = 0, n01 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool same_p = pred[i] == pred[j];
            const bool same_t = truth[i] == truth[j];
            if (same_p && same_t) ++n11;
            else if (!same_p && !same_t) ++n00;
            else if (same_p) ++n10;
            else ++n01;
        }
    }
    const double denom = (n11 + n10) * (n10 + n00) + (n11 + n01) * (n01 + n00);
    if (denom == 0.0) {
        // no pair disagreements at all -> identical partitions
        return n10 + n01 == 0.0 ? 1.0 : 0.0;
    }
    return 2.0 * (n11 * n00 - n10 * n01) / denom;
}

std::vector<int> random_partition(std::size_t n, int max_clusters, Rng& rng) {
    std::vector<int> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(static_cast<int>(rng.next_index(static_cast<std::uint64_t>(max_clusters))));
    }
    return out;
}

Interval make_interval(int shot, int start, int end) {
    Interval iv;
    iv.shot_id = shot;
    iv.start_frame = start;
    iv.end_frame = end;
    return iv;
}

}  // namespace

TEST_CASE("purity examples") {
    // identical partitions
    CHECK(purity({0, 0, 1, 1}, std::vector<int>{5, 5, 9, 9}) == 1.0);
    // clusters {A,A,B} and {B,B} -> (2 + 2) / 5
    CHECK(purity({0, 0, 0, 1, 1}, std::vector<int>{0, 0, 1, 1, 1}) == doctest::Approx(0.8));
    // one cluster, balanced labels
    CHECK(purity({0, 0, 0, 0}, std::vector<int>{0, 0, 1, 1}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(purity({}, std::vector<int>{}), std::invalid_argument);

    // invariance to relabeling on both sides
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        const auto pred = random_partition(20, 4, rng);
        const auto truth = random_partition(20, 3, rng);
        auto pred2 = pred;
        for (int& p : pred2) p = 7 - p;
        auto truth2 = truth;
        for (int& l : truth2) l = l * 13 + 2;
        CHECK(purity(pred, truth) == purity(pred2, truth2));
    }
}

TEST_CASE("purity never drops when a cluster splits") {
    Rng rng(23);
    for (int t = 0; t < 20; ++t) {
        const auto pred = random_partition(24, 4, rng);
        const auto truth = random_partition(24, 3, rng);
        // split cluster 0 into 0 and 4 arbitrarily
        auto split = pred;
        bool flip = false;
        for (int& p : split) {
            if (p == 0) {
                if (flip) p = 4;
                flip = !flip;
            }
        }
        CHECK(purity(split, truth) >= purity(pred, truth) - 1e-12);
    }
}

TEST_CASE("ari examples and oracle equivalence") {
    CHECK(adjusted_rand_index({0, 1, 2, 1}, std::vector<int>{3, 4, 5, 4}) == doctest::Approx(1.0));
    // single cluster vs non-trivial partition
    CHECK(adjusted_rand_index({0, 0, 0, 0}, std::vector<int>{0, 0, 1, 1}) == doctest::Approx(0.0));
    // pair-enumeration oracle on the spec's example
    const std::vector<int> pred{1, 1, 2, 2, 2};
    const std::vector<int> truth{0, 0, 0, 1, 1};
    CHECK(adjusted_rand_index(pred, truth) ==
          doctest::Approx(ari_pair_enumeration(pred, truth)).epsilon(1e-12));

    Rng rng(31);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 2 + rng.next_index(11);
        const auto p = random_partition(n, 4, rng);
        const auto q = random_partition(n, 4, rng);
        const double a = adjusted_rand_index(p, q);
        const double b = ari_pair_enumeration(p, q);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
        // symmetry
        CHECK(adjusted_rand_index(q, p) == doctest::Approx(a).epsilon(1e-12));
        // self-agreement
        CHECK(adjusted_rand_index(p, p) == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(adjusted_rand_index({}, std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("interval uniformity") {
    std::vector<std::string> labels;
    for (int i = 0; i < 7; ++i) labels.push_back("walk");
    for (int i = 0; i < 3; ++i) labels.push_back("run");

    CHECK(interval_uniformity(make_interval(0, 0, 7), labels) == 1.0);
    CHECK(interval_uniformity(make_interval(0, 0, 10), labels) == doctest::Approx(0.7));

    // whole shot with two equal behaviors
    std::vector<std::string> balanced(20, "walk");
    for (int i = 10; i < 20; ++i) balanced[static_cast<std::size_t>(i)] = "run";
    CHECK(interval_uniformity(make_interval(0, 0, 20), balanced) == doctest::Approx(0.5));

    // majority tie resolves to the earliest label in the interval
    CHECK(majority_label(make_interval(0, 0, 20), balanced) == "walk");
    CHECK(majority_label(make_interval(0, 5, 15), balanced) == "walk");

    CHECK_THROWS_AS(interval_uniformity(make_interval(0, 0, 25), balanced), std::invalid_argument);
}

TEST_CASE("distinct-shot counting per behavior") {
    SUBCASE("three intervals in one shot count once") {
        std::vector<Interval> ivs{make_interval(1, 0, 5), make_interval(1, 5, 9),
                                  make_interval(1, 9, 14)};
        const auto counts = count_intervals_per_behavior(ivs, {"walk", "walk", "walk"});
        CHECK(counts.at("walk") == 1);
    }
    SUBCASE("shots 1,2,2,5 count three") {
        std::vector<Interval> ivs{make_interval(1, 0, 5), make_interval(2, 0, 5),
                                  make_interval(2, 6, 9), make_interval(5, 0, 5)};
        const auto counts = count_intervals_per_behavior(ivs, {"walk", "walk", "walk", "walk"});
        CHECK(counts.at("walk") == 3);
    }
    SUBCASE("no intervals -> empty map") {
        CHECK(count_intervals_per_behavior({}, {}).empty());
    }
}

TEST_CASE("purity is non-decreasing along nested dendrogram cuts") {
    Rng rng(41);
    const int n = 14;
    std::vector<BoWHistogram> bows;
    std::vector<int> truth;
    for (int i = 0; i < n; ++i) {
        BoWHistogram h;
        h.weights.assign(6, 0.0);
        const int group = i % 3;
        h.weights[static_cast<std::size_t>(group)] = 0.8;
        h.weights[5] = 0.2 * rng.next_double();
        double sum = 0;
        for (double w : h.weights) sum += w;
        for (double& w : h.weights) w /= sum;
        bows.push_back(h);
        truth.push_back(group);
    }
    const auto dendro = hierarchical_cluster(distance_matrix(bows));
    double prev = 0.0;
    for (int k = 1; k <= n; ++k) {
        const double p = purity(cut_dendrogram(dendro, k), truth);
        CHECK(p >= prev - 1e-12);
        prev = p;
    }
}

TEST_CASE("metrics csv round trip") {
    std::vector<MetricsRow> rows{{5, 0.91, 0.77, 123, 0.88}, {6, 0.93, 0.80, 123, 0.88}};
    const std::string path = "/tmp/potminer_test.csv";
    save_metrics_csv(rows, path);
    const auto back = load_metrics_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].k == 5);
    CHECK(back[0].purity == doctest::Approx(0.91));
    CHECK(back[1].ari == doctest::Approx(0.80));
    CHECK(back[1].num_intervals == 123);
}
