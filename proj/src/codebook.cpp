#include "potminer/codebook.hpp"

#include "potminer/dataset_io.hpp"
#include "potminer/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace potminer {

void DescriptorMatrix::push(const std::vector<double>& v) {
    if (dim == 0) {
        dim = v.size();
    } else if (v.size() != dim) {
        throw std::invalid_argument("descriptor dimension mismatch: expected " +
                                    std::to_string(dim) + ", got " + std::to_string(v.size()));
    }
    values.insert(values.end(), v.begin(), v.end());
}

void KMeansOptions::validate() const {
    if (k < 1) throw std::invalid_argument("k-means: k must be >= 1");
    if (restarts < 1) throw std::invalid_argument("k-means: restarts must be >= 1");
    if (max_iterations < 1) throw std::invalid_argument("k-means: max_iterations must be >= 1");
}

namespace {

// Squared distance with early abandoning once the partial sum passes the
// current best. Ties resolve to the lower centroid index because only a
// strict improvement replaces the incumbent.
inline double dist2_bounded(const double* a, const double* b, std::size_t dim, double bound) {
    double acc = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= dim; i += 4) {
        const double d0 = a[i] - b[i];
        const double d1 = a[i + 1] - b[i + 1];
        const double d2 = a[i + 2] - b[i + 2];
        const double d3 = a[i + 3] - b[i + 3];
        acc += d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3;
        if (acc > bound) {
            return acc;
        }
    }
    for (; i < dim; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

inline void scan_point(const double* p, const std::vector<double>& centroids, int k,
                       std::size_t dim, int& out_idx, double& out_d2) {
    double best = std::numeric_limits<double>::infinity();
    int best_idx = 0;
    for (int c = 0; c < k; ++c) {
        const double d2 =
            dist2_bounded(p, centroids.data() + static_cast<std::size_t>(c) * dim, dim, best);
        if (d2 < best) {
            best = d2;
            best_idx = c;
        }
    }
    out_idx = best_idx;
    out_d2 = best;
}

void scan_impl(const DescriptorMatrix& points, const std::vector<double>& centroids, int k,
               std::vector<int>& assignment, std::vector<double>& dist2, bool parallel) {
    const std::size_t n = points.count();
    assignment.resize(n);
    dist2.resize(n);
    if (parallel) {
        const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            scan_point(points.row(static_cast<std::size_t>(i)), centroids, k, points.dim,
                       assignment[static_cast<std::size_t>(i)], dist2[static_cast<std::size_t>(i)]);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            scan_point(points.row(i), centroids, k, points.dim, assignment[i], dist2[i]);
        }
    }
}

struct LloydResult {
    std::vector<double> centroids;
    double energy = 0.0;
    std::vector<double> energy_history;
};

// Nearest and second-nearest centroid for one point. Strict comparisons
// keep the ties-to-lowest-index rule identical to the plain scan.
inline void scan_point2(const double* p, const std::vector<double>& centroids, int k,
                        std::size_t dim, int& out_idx, double& out_d, double& out_second) {
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    int best_idx = 0;
    for (int c = 0; c < k; ++c) {
        const double d2 =
            dist2_bounded(p, centroids.data() + static_cast<std::size_t>(c) * dim, dim, second);
        if (d2 < best) {
            second = best;
            best = d2;
            best_idx = c;
        } else if (d2 < second) {
            second = d2;
        }
    }
    out_idx = best_idx;
    out_d = std::sqrt(best);
    out_second = std::sqrt(second);
}

LloydResult lloyd_run(const DescriptorMatrix& points, const KMeansOptions& opts, Rng& rng) {
    const std::size_t n = points.count();
    const std::size_t dim = points.dim;
    const std::size_t k = static_cast<std::size_t>(opts.k);

    std::vector<double> centroids(k * dim);
    if (opts.kmeanspp) {
        // D^2 seeding.
        std::vector<double> d2(n, std::numeric_limits<double>::infinity());
        std::size_t first = static_cast<std::size_t>(rng.next_index(n));
        std::copy_n(points.row(first), dim, centroids.begin());
        for (std::size_t c = 1; c < k; ++c) {
            const double* prev = centroids.data() + (c - 1) * dim;
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = dist2_bounded(points.row(i), prev, dim, d2[i]);
                if (d < d2[i]) {
                    d2[i] = d;
                }
                total += d2[i];
            }
            std::size_t pick = 0;
            if (total > 0.0) {
                const double target = rng.next_double() * total;
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (acc >= target) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<std::size_t>(rng.next_index(n));
            }
            std::copy_n(points.row(pick), dim, centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
        }
    } else {
        const auto picks = sample_without_replacement(n, k, rng);
        for (std::size_t c = 0; c < k; ++c) {
            std::copy_n(points.row(picks[c]), dim, centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
        }
    }

    // Lloyd with Hamerly bounds: per point, an upper bound on the distance
    // to its centroid and a lower bound on the distance to every other
    // centroid. Most points skip the full scan once assignments settle,
    // and strict comparisons keep the result bit-identical to a plain
    // rescan every iteration (the tie-to-lowest-index rule included).
    std::vector<int> assignment(n);
    std::vector<double> upper(n), lower(n);
    {
        const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            scan_point2(points.row(static_cast<std::size_t>(i)), centroids, opts.k, dim,
                        assignment[static_cast<std::size_t>(i)], upper[static_cast<std::size_t>(i)],
                        lower[static_cast<std::size_t>(i)]);
        }
    }

    std::vector<double> dist2(n);  // exact distance to the assigned centroid
    std::vector<double> sums(k * dim);
    std::vector<double> old_centroid(dim);
    std::vector<double> delta(k);
    std::vector<double> half_sep(k);  // s_c: half the distance to the nearest other centroid
    std::vector<std::size_t> counts(k);
    LloydResult result;
    double prev_energy = std::numeric_limits<double>::infinity();
    bool reseeded_last = false;
    bool changed_last = true;

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        {
            const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t i = 0; i < count; ++i) {
                const auto iu = static_cast<std::size_t>(i);
                dist2[iu] = dist2_bounded(
                    points.row(iu),
                    centroids.data() + static_cast<std::size_t>(assignment[iu]) * dim, dim,
                    std::numeric_limits<double>::infinity());
            }
        }
        double energy = 0.0;
        for (double d : dist2) {
            energy += d;
        }
        if (energy > prev_energy * (1.0 + 1e-12) + 1e-9) {
            throw std::logic_error("k-means energy increased across an iteration");
        }
        result.energy_history.push_back(energy);
        prev_energy = energy;
        result.energy = energy;

        if (iter > 0 && !reseeded_last && !changed_last) {
            break;
        }

        // Means of the current assignment.
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assignment[i]);
            const double* p = points.row(i);
            double* s = sums.data() + c * dim;
            for (std::size_t d = 0; d < dim; ++d) {
                s[d] += p[d];
            }
            ++counts[c];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                delta[c] = 0.0;
                continue;
            }
            const double inv = 1.0 / static_cast<double>(counts[c]);
            double* dst = centroids.data() + c * dim;
            const double* s = sums.data() + c * dim;
            std::copy_n(dst, dim, old_centroid.begin());
            for (std::size_t d = 0; d < dim; ++d) {
                dst[d] = s[d] * inv;
            }
            delta[c] = std::sqrt(dist2_bounded(old_centroid.data(), dst, dim,
                                               std::numeric_limits<double>::infinity()));
        }

        // Re-seed empty clusters with the farthest point from its centroid;
        // each reseed consumes its point so later empties pick the next one.
        reseeded_last = false;
        std::vector<std::size_t> taken;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) {
                continue;
            }
            double far_d = -1.0;
            std::size_t far_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (std::find(taken.begin(), taken.end(), i) != taken.end()) {
                    continue;
                }
                if (dist2[i] > far_d) {
                    far_d = dist2[i];
                    far_i = i;
                }
            }
            double* dst = centroids.data() + c * dim;
            std::copy_n(dst, dim, old_centroid.begin());
            std::copy_n(points.row(far_i), dim, centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
            delta[c] = std::sqrt(dist2_bounded(old_centroid.data(), dst, dim,
                                               std::numeric_limits<double>::infinity()));
            taken.push_back(far_i);
            reseeded_last = true;
        }

        double delta_max = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            delta_max = std::max(delta_max, delta[c]);
        }

        // Half distance from each centroid to its nearest other centroid.
        {
            const auto kk = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t c = 0; c < kk; ++c) {
                double nearest = std::numeric_limits<double>::infinity();
                for (std::ptrdiff_t o = 0; o < kk; ++o) {
                    if (o == c) {
                        continue;
                    }
                    nearest = std::min(
                        nearest, dist2_bounded(centroids.data() + static_cast<std::size_t>(c) * dim,
                                               centroids.data() + static_cast<std::size_t>(o) * dim,
                                               dim, nearest));
                }
                half_sep[static_cast<std::size_t>(c)] = 0.5 * std::sqrt(nearest);
            }
        }

        // Refine assignments under the moved centroids.
        bool changed = false;
        {
            const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) reduction(|| : changed)
            for (std::ptrdiff_t i = 0; i < count; ++i) {
                const auto iu = static_cast<std::size_t>(i);
                const int a = assignment[iu];
                upper[iu] += delta[static_cast<std::size_t>(a)];
                lower[iu] -= delta_max;
                const double bound = std::max(half_sep[static_cast<std::size_t>(a)], lower[iu]);
                if (upper[iu] < bound) {
                    continue;
                }
                upper[iu] = std::sqrt(dist2_bounded(
                    points.row(iu), centroids.data() + static_cast<std::size_t>(a) * dim, dim,
                    std::numeric_limits<double>::infinity()));
                if (upper[iu] < bound) {
                    continue;
                }
                int na;
                double nu, nl;
                scan_point2(points.row(iu), centroids, opts.k, dim, na, nu, nl);
                if (na != a) {
                    changed = true;
                }
                assignment[iu] = na;
                upper[iu] = nu;
                lower[iu] = nl;
            }
        }
        changed_last = changed;
    }
    result.centroids = std::move(centroids);
    return result;
}

void standardize_in_place(DescriptorMatrix& m, std::vector<double>& mean, std::vector<double>& sd) {
    const std::size_t n = m.count();
    const std::size_t dim = m.dim;
    mean.assign(dim, 0.0);
    sd.assign(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = m.row(i);
        for (std::size_t d = 0; d < dim; ++d) {
            mean[d] += r[d];
        }
    }
    for (double& v : mean) {
        v /= static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = m.row(i);
        for (std::size_t d = 0; d < dim; ++d) {
            const double c = r[d] - mean[d];
            sd[d] += c * c;
        }
    }
    for (double& v : sd) {
        v = std::sqrt(v / static_cast<double>(n));
        if (v < 1e-12) {
            v = 1.0;  // constant component, leave it centered
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double* r = m.values.data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) {
            r[d] = (r[d] - mean[d]) / sd[d];
        }
    }
}

}  // namespace

void nearest_centroid_scan(const DescriptorMatrix& points, const std::vector<double>& centroids,
                           int k, std::vector<int>& assignment, std::vector<double>& dist2) {
    scan_impl(points, centroids, k, assignment, dist2, true);
}

void nearest_centroid_scan_serial(const DescriptorMatrix& points,
                                  const std::vector<double>& centroids, int k,
                                  std::vector<int>& assignment, std::vector<double>& dist2) {
    scan_impl(points, centroids, k, assignment, dist2, false);
}

Codebook build_codebook(const DescriptorMatrix& sample, const KMeansOptions& opts,
                        KMeansDiagnostics* diagnostics) {
    opts.validate();
    if (sample.dim == 0 || sample.count() == 0) {
        throw std::invalid_argument("build_codebook: empty descriptor sample");
    }
    if (sample.count() < static_cast<std::size_t>(opts.k)) {
        throw std::invalid_argument("build_codebook: sample size " + std::to_string(sample.count()) +
                                    " is smaller than k = " + std::to_string(opts.k) +
                                    "; choose a smaller k");
    }

    DescriptorMatrix train = sample;
    Codebook cb;
    cb.k = opts.k;
    cb.descriptor_dim = static_cast<int>(sample.dim);
    cb.seed = opts.seed;
    if (opts.standardize) {
        cb.standardized = true;
        standardize_in_place(train, cb.comp_mean, cb.comp_std);
    }

    double best_energy = std::numeric_limits<double>::infinity();
    LloydResult best;
    int chosen = -1;
    for (int r = 0; r < opts.restarts; ++r) {
        Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(r)));
        LloydResult run = lloyd_run(train, opts, rng);
        if (diagnostics) {
            diagnostics->energy_history.push_back(run.energy_history);
            diagnostics->final_energy.push_back(run.energy);
        }
        if (run.energy < best_energy) {
            best_energy = run.energy;
            best = std::move(run);
            chosen = r;
        }
    }
    if (diagnostics) {
        diagnostics->chosen_restart = chosen;
    }
    cb.energy = best.energy;
    cb.centroids = std::move(best.centroids);
    return cb;
}

int quantize(const std::vector<double>& descriptor, const Codebook& cb) {
    if (descriptor.size() != static_cast<std::size_t>(cb.descriptor_dim)) {
        throw std::invalid_argument("quantize: descriptor dimension " +
                                    std::to_string(descriptor.size()) + " != codebook dimension " +
                                    std::to_string(cb.descriptor_dim));
    }
    std::vector<double> probe = descriptor;
    if (cb.standardized) {
        for (std::size_t d = 0; d < probe.size(); ++d) {
            probe[d] = (probe[d] - cb.comp_mean[d]) / cb.comp_std[d];
        }
    }
    int idx;
    double d2;
    scan_point(probe.data(), cb.centroids, cb.k, probe.size(), idx, d2);
    return idx;
}

namespace {

std::vector<int> quantize_all_impl(const DescriptorMatrix& descriptors, const Codebook& cb,
                                   bool parallel) {
    if (descriptors.count() == 0) {
        return {};
    }
    if (descriptors.dim != static_cast<std::size_t>(cb.descriptor_dim)) {
        throw std::invalid_argument("quantize_all: dimension mismatch");
    }
    DescriptorMatrix probe = descriptors;
    if (cb.standardized) {
        const std::size_t n = probe.count();
        for (std::size_t i = 0; i < n; ++i) {
            double* r = probe.values.data() + i * probe.dim;
            for (std::size_t d = 0; d < probe.dim; ++d) {
                r[d] = (r[d] - cb.comp_mean[d]) / cb.comp_std[d];
            }
        }
    }
    std::vector<int> assignment;
    std::vector<double> dist2;
    scan_impl(probe, cb.centroids, cb.k, assignment, dist2, parallel);
    return assignment;
}

}  // namespace

std::vector<int> quantize_all(const DescriptorMatrix& descriptors, const Codebook& cb) {
    return quantize_all_impl(descriptors, cb, true);
}

std::vector<int> quantize_all_serial(const DescriptorMatrix& descriptors, const Codebook& cb) {
    return quantize_all_impl(descriptors, cb, false);
}

BoWHistogram bow(const std::vector<int>& codewords, int k) {
    BoWHistogram h;
    h.weights.assign(static_cast<std::size_t>(k), 0.0);
    if (codewords.empty()) {
        h.empty = true;
        return h;
    }
    for (int c : codewords) {
        if (c < 0 || c >= k) {
            throw std::invalid_argument("bow: codeword " + std::to_string(c) + " out of range");
        }
        h.weights[static_cast<std::size_t>(c)] += 1.0;
    }
    const double inv = 1.0 / static_cast<double>(codewords.size());
    for (double& w : h.weights) {
        w *= inv;
    }
    return h;
}

DescriptorMatrix sample_descriptors(const DescriptorMatrix& all, std::size_t cap,
                                    std::uint64_t seed) {
    if (all.count() <= cap) {
        return all;
    }
    Rng rng(seed);
    const auto picks = sample_without_replacement(all.count(), cap, rng);
    DescriptorMatrix out;
    out.dim = all.dim;
    out.values.reserve(cap * all.dim);
    for (std::size_t i : picks) {
        out.values.insert(out.values.end(), all.row(i), all.row(i) + all.dim);
    }
    return out;
}

void write_codebook(const Codebook& cb, std::ostream& out) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", cb.energy);
    out << "codebook " << cb.k << ' ' << cb.descriptor_dim << ' ' << cb.seed << ' ' << buf << '\n';
    auto write_row = [&](const char* tag, const double* row, std::size_t n) {
        std::string line(tag);
        for (std::size_t d = 0; d < n; ++d) {
            std::snprintf(buf, sizeof(buf), " %.17g", row[d]);
            line += buf;
        }
        line += '\n';
        out << line;
    };
    if (cb.standardized) {
        write_row("standardize_mean", cb.comp_mean.data(), cb.comp_mean.size());
        write_row("standardize_std", cb.comp_std.data(), cb.comp_std.size());
    }
    const auto dim = static_cast<std::size_t>(cb.descriptor_dim);
    for (int c = 0; c < cb.k; ++c) {
        std::string line;
        for (std::size_t d = 0; d < dim; ++d) {
            std::snprintf(buf, sizeof(buf), d == 0 ? "%.17g" : " %.17g", cb.centroid(c)[d]);
            line += buf;
        }
        line += '\n';
        out << line;
    }
}

void save_codebook(const Codebook& cb, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    write_codebook(cb, out);
}

Codebook load_codebook(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open codebook: " + path);
    }
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw ParseError(path, 1, "missing codebook header");
    }
    ++lineno;
    std::istringstream hs(line);
    std::string tag;
    Codebook cb;
    if (!(hs >> tag >> cb.k >> cb.descriptor_dim >> cb.seed >> cb.energy) || tag != "codebook") {
        throw ParseError(path, lineno, "bad codebook header");
    }
    const auto dim = static_cast<std::size_t>(cb.descriptor_dim);
    cb.centroids.reserve(static_cast<std::size_t>(cb.k) * dim);
    int rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream ss(line);
        if (line.rfind("standardize_mean", 0) == 0 || line.rfind("standardize_std", 0) == 0) {
            ss >> tag;
            auto& dst = tag == "standardize_mean" ? cb.comp_mean : cb.comp_std;
            cb.standardized = true;
            double v;
            while (ss >> v) {
                dst.push_back(v);
            }
            if (dst.size() != dim) {
                throw ParseError(path, lineno, tag + " length != descriptor dim");
            }
            continue;
        }
        double v;
        std::size_t got = 0;
        while (ss >> v) {
            cb.centroids.push_back(v);
            ++got;
        }
        if (got != dim) {
            throw ParseError(path, lineno, "centroid has " + std::to_string(got) +
                                               " components, expected " + std::to_string(dim));
        }
        ++rows;
    }
    if (rows != cb.k) {
        throw ParseError(path, lineno, "expected " + std::to_string(cb.k) + " centroids, got " +
                                           std::to_string(rows));
    }
    return cb;
}

}  // namespace potminer
