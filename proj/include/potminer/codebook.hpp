#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace potminer {

/// Row-major descriptor storage (count x dim).
struct DescriptorMatrix {
    std::size_t dim = 0;
    std::vector<double> values;

    std::size_t count() const { return dim == 0 ? 0 : values.size() / dim; }
    const double* row(std::size_t i) const { return values.data() + i * dim; }
    void push(const std::vector<double>& v);
};

struct KMeansOptions {
    int k = 800;
    int restarts = 8;
    std::uint64_t seed = 0;
    int max_iterations = 100;
    bool kmeanspp = false;      // uniform init by default, 8 restarts hedge it
    bool standardize = false;   // per-component standardization before clustering

    void validate() const;
};

struct Codebook {
    int k = 0;
    int descriptor_dim = 0;
    std::uint64_t seed = 0;
    double energy = 0.0;  // within-cluster sum of squared distances
    std::vector<double> centroids;  // k * dim, row-major
    bool standardized = false;
    std::vector<double> comp_mean;  // per component, when standardized
    std::vector<double> comp_std;

    const double* centroid(int c) const {
        return centroids.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(descriptor_dim);
    }
};

/// Per-restart evidence for the lowest-energy selection and the
/// monotonicity contract; filled when requested by tests.
struct KMeansDiagnostics {
    std::vector<std::vector<double>> energy_history;  // one list per restart
    std::vector<double> final_energy;
    int chosen_restart = -1;
};

/// Lloyd iterations until assignments stabilize (or max_iterations), run
/// `restarts` times; the lowest-energy run wins. Empty clusters are
/// re-seeded with the point farthest from its centroid. Throws when the
/// sample is smaller than k. Energy is asserted non-increasing per
/// iteration.
Codebook build_codebook(const DescriptorMatrix& sample, const KMeansOptions& opts,
                        KMeansDiagnostics* diagnostics = nullptr);

/// Index of the nearest centroid (Euclidean, ties to the lowest index).
int quantize(const std::vector<double>& descriptor, const Codebook& cb);

std::vector<int> quantize_all(const DescriptorMatrix& descriptors, const Codebook& cb);
std::vector<int> quantize_all_serial(const DescriptorMatrix& descriptors, const Codebook& cb);

/// Nearest-centroid scan kernel: fills assignments and squared distances.
/// `centroids` is k x dim row-major, in the same space as `points`.
void nearest_centroid_scan(const DescriptorMatrix& points, const std::vector<double>& centroids,
                           int k, std::vector<int>& assignment, std::vector<double>& dist2);
void nearest_centroid_scan_serial(const DescriptorMatrix& points,
                                  const std::vector<double>& centroids, int k,
                                  std::vector<int>& assignment, std::vector<double>& dist2);

struct BoWHistogram {
    std::vector<double> weights;
    bool empty = false;
};

/// L1-normalized codeword histogram; an empty input yields an all-zero
/// histogram with the empty flag set.
BoWHistogram bow(const std::vector<int>& codewords, int k);

/// Uniform sample without replacement, capped at `cap` rows.
DescriptorMatrix sample_descriptors(const DescriptorMatrix& all, std::size_t cap,
                                    std::uint64_t seed);

// Serialization: `codebook <K> <dim> <seed> <energy>` header, one centroid
// per line; standardization, when enabled, adds two extra header lines.
void write_codebook(const Codebook& cb, std::ostream& out);
void save_codebook(const Codebook& cb, const std::string& path);
Codebook load_codebook(const std::string& path);

}  // namespace potminer
