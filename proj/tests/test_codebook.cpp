#include "potminer/codebook.hpp"
#include "potminer/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace potminer;

namespace {

DescriptorMatrix random_matrix(std::size_t n, std::size_t dim, Rng& rng, double lo = -1,
                               double hi = 1) {
    DescriptorMatrix m;
    m.dim = dim;
    for (std::size_t i = 0; i < n * dim; ++i) {
        m.values.push_back(rng.next_uniform(lo, hi));
    }
    return m;
}

}  // namespace

TEST_CASE("k = 1 gives the component-wise mean and the total scatter") {
    Rng rng(5);
    const auto data = random_matrix(100, 3, rng);
    KMeansOptions opts;
    opts.k = 1;
    opts.restarts = 2;
    opts.seed = 9;
    const auto cb = build_codebook(data, opts);
    std::vector<double> mean(3, 0.0);
    for (std::size_t i = 0; i < data.count(); ++i) {
        for (std::size_t d = 0; d < 3; ++d) {
            mean[d] += data.row(i)[d];
        }
    }
    for (double& v : mean) v /= 100.0;
    double scatter = 0.0;
    for (std::size_t i = 0; i < data.count(); ++i) {
        for (std::size_t d = 0; d < 3; ++d) {
            const double c = data.row(i)[d] - mean[d];
            scatter += c * c;
        }
    }
    for (std::size_t d = 0; d < 3; ++d) {
        CHECK(cb.centroids[d] == doctest::Approx(mean[d]).epsilon(1e-12));
    }
    CHECK(cb.energy == doctest::Approx(scatter).epsilon(1e-9));
}

TEST_CASE("two separated blobs: centroids land on blob means") {
    Rng rng(17);
    DescriptorMatrix data;
    data.dim = 2;
    std::vector<double> mean_a(2, 0.0), mean_b(2, 0.0);
    for (int i = 0; i < 60; ++i) {
        const double x = rng.next_uniform(-1, 1), y = rng.next_uniform(-1, 1);
        data.values.insert(data.values.end(), {x, y});
        mean_a[0] += x;
        mean_a[1] += y;
    }
    for (int i = 0; i < 40; ++i) {
        const double x = 100 + rng.next_uniform(-1, 1), y = 50 + rng.next_uniform(-1, 1);
        data.values.insert(data.values.end(), {x, y});
        mean_b[0] += x;
        mean_b[1] += y;
    }
    for (double& v : mean_a) v /= 60.0;
    for (double& v : mean_b) v /= 40.0;

    KMeansOptions opts;
    opts.k = 2;
    opts.restarts = 8;
    opts.seed = 3;
    const auto cb = build_codebook(data, opts);

    // Brute-force oracle: the blob split is the optimal 2-assignment.
    const bool first_is_a = cb.centroids[0] < 50.0;
    const double* ca = first_is_a ? cb.centroid(0) : cb.centroid(1);
    const double* cbk = first_is_a ? cb.centroid(1) : cb.centroid(0);
    CHECK(ca[0] == doctest::Approx(mean_a[0]).epsilon(1e-9));
    CHECK(ca[1] == doctest::Approx(mean_a[1]).epsilon(1e-9));
    CHECK(cbk[0] == doctest::Approx(mean_b[0]).epsilon(1e-9));
    CHECK(cbk[1] == doctest::Approx(mean_b[1]).epsilon(1e-9));
}

TEST_CASE("same seed, same input, bit-identical codebook") {
    Rng rng(33);
    const auto data = random_matrix(300, 5, rng);
    KMeansOptions opts;
    opts.k = 12;
    opts.restarts = 4;
    opts.seed = 77;
    const auto a = build_codebook(data, opts);
    const auto b = build_codebook(data, opts);
    CHECK(a.centroids == b.centroids);
    CHECK(a.energy == b.energy);
}

TEST_CASE("sample smaller than k is an error") {
    Rng rng(1);
    const auto data = random_matrix(5, 2, rng);
    KMeansOptions opts;
    opts.k = 10;
    CHECK_THROWS_WITH_AS(build_codebook(data, opts), doctest::Contains("smaller k"),
                         std::invalid_argument);
}

TEST_CASE("energy history is non-increasing and the best restart wins") {
    Rng rng(8);
    const auto data = random_matrix(400, 4, rng);
    KMeansOptions opts;
    opts.k = 16;
    opts.restarts = 8;
    opts.seed = 19;
    KMeansDiagnostics diag;
    const auto cb = build_codebook(data, opts, &diag);
    REQUIRE(diag.final_energy.size() == 8);
    for (const auto& hist : diag.energy_history) {
        for (std::size_t i = 1; i < hist.size(); ++i) {
            CHECK(hist[i] <= hist[i - 1] * (1 + 1e-12) + 1e-9);
        }
    }
    for (double e : diag.final_energy) {
        CHECK(cb.energy <= e);
    }
    CHECK(diag.final_energy[static_cast<std::size_t>(diag.chosen_restart)] == cb.energy);
}

TEST_CASE("quantize: exact centroid, tie break, and linear-scan oracle") {
    Codebook cb;
    cb.k = 5;
    cb.descriptor_dim = 2;
    cb.centroids = {0, 0, /**/ 2, 0, /**/ 4, 0, /**/ 2, 2, /**/ 2, -2};
    CHECK(quantize({4, 0}, cb) == 2);
    // (1, 0) is equidistant from centroids 0 and 1 -> lowest index wins.
    CHECK(quantize({1, 0}, cb) == 0);
    CHECK_THROWS_AS(quantize({1, 2, 3}, cb), std::invalid_argument);

    Rng rng(4);
    Codebook rcb;
    rcb.k = 40;
    rcb.descriptor_dim = 7;
    for (int i = 0; i < 40 * 7; ++i) {
        rcb.centroids.push_back(rng.next_uniform(-3, 3));
    }
    for (int probe = 0; probe < 1000; ++probe) {
        std::vector<double> v;
        for (int d = 0; d < 7; ++d) {
            v.push_back(rng.next_uniform(-3, 3));
        }
        // independent exhaustive scan
        int best = -1;
        double bd = 1e300;
        for (int c = 0; c < rcb.k; ++c) {
            double acc = 0;
            for (int d = 0; d < 7; ++d) {
                const double diff = v[static_cast<std::size_t>(d)] -
                                    rcb.centroid(c)[static_cast<std::size_t>(d)];
                acc += diff * diff;
            }
            if (acc < bd) {
                bd = acc;
                best = c;
            }
        }
        CHECK(quantize(v, rcb) == best);
    }
}

TEST_CASE("bow histograms") {
    const auto h1 = bow({0, 0, 0, 0}, 2);
    CHECK(h1.weights == std::vector<double>{1.0, 0.0});
    CHECK_FALSE(h1.empty);

    const auto h2 = bow({0, 0, 1, 3}, 4);
    CHECK(h2.weights == std::vector<double>{0.5, 0.25, 0.0, 0.25});

    const auto h3 = bow({}, 3);
    CHECK(h3.empty);
    CHECK(h3.weights == std::vector<double>{0.0, 0.0, 0.0});

    // probability vector property on random inputs
    Rng rng(6);
    for (int t = 0; t < 50; ++t) {
        std::vector<int> cws;
        const int k = 10;
        const int m = 1 + static_cast<int>(rng.next_index(30));
        for (int i = 0; i < m; ++i) {
            cws.push_back(static_cast<int>(rng.next_index(k)));
        }
        const auto h = bow(cws, k);
        double sum = 0;
        for (double w : h.weights) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("parallel and serial scans agree bit-exactly") {
    Rng rng(12);
    const auto data = random_matrix(500, 19, rng);
    std::vector<double> centroids;
    for (int i = 0; i < 30 * 19; ++i) {
        centroids.push_back(rng.next_uniform(-1, 1));
    }
    std::vector<int> a1, a2;
    std::vector<double> d1, d2;
    nearest_centroid_scan(data, centroids, 30, a1, d1);
    nearest_centroid_scan_serial(data, centroids, 30, a2, d2);
    CHECK(a1 == a2);
    CHECK(d1 == d2);
}

TEST_CASE("descriptor sampling caps deterministically") {
    Rng rng(3);
    const auto data = random_matrix(100, 4, rng);
    const auto all = sample_descriptors(data, 200, 5);
    CHECK(all.count() == 100);
    const auto some = sample_descriptors(data, 25, 5);
    const auto some2 = sample_descriptors(data, 25, 5);
    CHECK(some.count() == 25);
    CHECK(some.values == some2.values);
}

TEST_CASE("codebook serialization round trip") {
    Rng rng(21);
    const auto data = random_matrix(50, 3, rng);
    KMeansOptions opts;
    opts.k = 4;
    opts.restarts = 2;
    opts.seed = 2;
    const auto cb = build_codebook(data, opts);
    const std::string path = "/tmp/potminer_test.cb";
    save_codebook(cb, path);
    const auto back = load_codebook(path);
    CHECK(back.k == cb.k);
    CHECK(back.descriptor_dim == cb.descriptor_dim);
    CHECK(back.seed == cb.seed);
    CHECK(back.energy == cb.energy);
    CHECK(back.centroids == cb.centroids);
}
