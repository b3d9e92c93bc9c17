#pragma once

#include "potminer/codebook.hpp"
#include "potminer/evalmetrics.hpp"
#include "potminer/partition.hpp"
#include "potminer/pot.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace potminer {

/// Every stage parameter, paper defaults. A JSON config file may set any
/// subset; CLI flags override on top of that.
struct PipelineConfig {
    int n = 10;
    double theta_p = 0.15;
    double theta_f = 0.1;
    double theta_h = 0.1;
    int min_period = 5;
    int min_cycles = 3;
    int smooth_width = 3;
    int smooth_min_window = 30;
    double extend_tolerance = 0.05;
    int min_remainder = 5;
    bool span_indexing = false;
    double max_pair_distance = 0.0;
    int codebook_k = 800;
    int ts_codebook_k = 4000;
    int restarts = 8;
    std::uint64_t seed = 7;
    std::size_t sample_cap = 1000000;
    bool kmeanspp = false;
    bool standardize = false;
    std::vector<std::string> channels{"pot"};
    int k_lo = 2;  // cluster-count sweep, inclusive
    int k_hi = 20;
    int threads = 0;

    void validate() const;

    SelectionConfig selection_config() const;
    PartitionConfig partition_config() const;
    KMeansOptions kmeans_options(bool ts_channel) const;
    std::vector<int> k_sweep(int max_k) const;

    std::string to_json_string() const;              // canonical, sorted keys
    std::string hash() const;                        // fnv1a-64 of the above
    static PipelineConfig from_json_file(const std::string& path);
};

// Fixed stage order; `stop_after` names the last stage to run.
extern const std::vector<std::string> kPipelineStages;

struct PipelineResult {
    std::vector<std::string> stages_run;
    std::vector<MetricsRow> metrics;
    std::string out_dir;
};

/// Runs the pipeline over a dataset file into an artifacts directory.
/// Every intermediate is written in its module's file format, and
/// manifest.json records the exact config and hash (no timestamps, so two
/// runs with the same inputs are byte-identical).
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::string& dataset_path,
                            const std::string& out_dir, const std::string& stop_after = "");

/// metrics.csv -> report.svg (purity/ARI vs k) and gallery.txt with
/// per-cluster interval listings and anchor/swing overlay coordinates.
void render_report(const std::string& artifacts_dir);

// stats dump: mstat <shot> <transition> <present> <mvx> <mvy> <sigma>
//             ascore <shot> <frame> <value>
void save_stats_dump(const Dataset& dataset, const std::vector<FrameMotionStats>& stats,
                     const std::string& path);

}  // namespace potminer
