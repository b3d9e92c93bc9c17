#include "potminer/pipeline.hpp"

#include "potminer/cluster.hpp"
#include "potminer/dataset_io.hpp"
#include "potminer/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace potminer {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kPipelineStages = {"stats",     "pot",  "codebook", "partition",
                                                  "cluster",   "eval", "report"};

void PipelineConfig::validate() const {
    selection_config().validate();
    partition_config().validate();
    kmeans_options(false).validate();
    kmeans_options(true).validate();
    if (channels.empty()) {
        throw std::invalid_argument("config: channels must not be empty");
    }
    for (const auto& c : channels) {
        if (c != "pot" && c != "ts") {
            throw std::invalid_argument("config: unknown channel '" + c + "' (pot or ts)");
        }
    }
    if (k_lo < 1 || k_hi < k_lo) {
        throw std::invalid_argument("config: k range must satisfy 1 <= k_lo <= k_hi");
    }
    if (threads < 0) {
        throw std::invalid_argument("config: threads must be >= 0");
    }
}

SelectionConfig PipelineConfig::selection_config() const {
    SelectionConfig s;
    s.n = n;
    s.theta_p = theta_p;
    s.theta_f = theta_f;
    s.max_pair_distance = max_pair_distance;
    return s;
}

PartitionConfig PipelineConfig::partition_config() const {
    PartitionConfig p;
    p.theta_f = theta_f;
    p.periodicity.theta_h = theta_h;
    p.periodicity.min_period = min_period;
    p.periodicity.min_cycles = min_cycles;
    p.periodicity.smooth_width = smooth_width;
    p.periodicity.smooth_min_window = smooth_min_window;
    p.periodicity.extend_tolerance = extend_tolerance;
    p.min_remainder = min_remainder;
    p.span_indexing = span_indexing;
    p.n = n;
    return p;
}

KMeansOptions PipelineConfig::kmeans_options(bool ts_channel) const {
    KMeansOptions o;
    o.k = ts_channel ? ts_codebook_k : codebook_k;
    o.restarts = restarts;
    o.seed = ts_channel ? derive_seed(seed, 0x7453) : seed;
    o.kmeanspp = kmeanspp;
    o.standardize = standardize;
    return o;
}

std::vector<int> PipelineConfig::k_sweep(int max_k) const {
    std::vector<int> ks;
    for (int k = k_lo; k <= k_hi && k <= max_k; ++k) {
        ks.push_back(k);
    }
    if (ks.empty() && max_k >= 1) {
        ks.push_back(std::min(k_lo, max_k));
    }
    return ks;
}

namespace {

json config_to_json(const PipelineConfig& c) {
    json j;
    j["n"] = c.n;
    j["theta_p"] = c.theta_p;
    j["theta_f"] = c.theta_f;
    j["theta_h"] = c.theta_h;
    j["min_period"] = c.min_period;
    j["min_cycles"] = c.min_cycles;
    j["smooth_width"] = c.smooth_width;
    j["smooth_min_window"] = c.smooth_min_window;
    j["extend_tolerance"] = c.extend_tolerance;
    j["min_remainder"] = c.min_remainder;
    j["span_indexing"] = c.span_indexing;
    j["max_pair_distance"] = c.max_pair_distance;
    j["codebook_k"] = c.codebook_k;
    j["ts_codebook_k"] = c.ts_codebook_k;
    j["restarts"] = c.restarts;
    j["seed"] = c.seed;
    j["sample_cap"] = c.sample_cap;
    j["kmeanspp"] = c.kmeanspp;
    j["standardize"] = c.standardize;
    j["channels"] = c.channels;
    j["k_range"] = {c.k_lo, c.k_hi};
    j["threads"] = c.threads;
    return j;
}

}  // namespace

std::string PipelineConfig::to_json_string() const { return config_to_json(*this).dump(2); }

std::string PipelineConfig::hash() const {
    const std::string s = to_json_string();
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }
    PipelineConfig c;
    if (j.contains("n")) c.n = j.at("n").get<int>();
    if (j.contains("theta_p")) c.theta_p = j.at("theta_p").get<double>();
    if (j.contains("theta_f")) c.theta_f = j.at("theta_f").get<double>();
    if (j.contains("theta_h")) c.theta_h = j.at("theta_h").get<double>();
    if (j.contains("min_period")) c.min_period = j.at("min_period").get<int>();
    if (j.contains("min_cycles")) c.min_cycles = j.at("min_cycles").get<int>();
    if (j.contains("smooth_width")) c.smooth_width = j.at("smooth_width").get<int>();
    if (j.contains("smooth_min_window")) c.smooth_min_window = j.at("smooth_min_window").get<int>();
    if (j.contains("extend_tolerance")) c.extend_tolerance = j.at("extend_tolerance").get<double>();
    if (j.contains("min_remainder")) c.min_remainder = j.at("min_remainder").get<int>();
    if (j.contains("span_indexing")) c.span_indexing = j.at("span_indexing").get<bool>();
    if (j.contains("max_pair_distance")) c.max_pair_distance = j.at("max_pair_distance").get<double>();
    if (j.contains("codebook_k")) c.codebook_k = j.at("codebook_k").get<int>();
    if (j.contains("ts_codebook_k")) c.ts_codebook_k = j.at("ts_codebook_k").get<int>();
    if (j.contains("restarts")) c.restarts = j.at("restarts").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("sample_cap")) c.sample_cap = j.at("sample_cap").get<std::size_t>();
    if (j.contains("kmeanspp")) c.kmeanspp = j.at("kmeanspp").get<bool>();
    if (j.contains("standardize")) c.standardize = j.at("standardize").get<bool>();
    if (j.contains("channels")) c.channels = j.at("channels").get<std::vector<std::string>>();
    if (j.contains("k")) {
        c.k_lo = c.k_hi = j.at("k").get<int>();
    }
    if (j.contains("k_range")) {
        c.k_lo = j.at("k_range").at(0).get<int>();
        c.k_hi = j.at("k_range").at(1).get<int>();
    }
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    c.validate();
    return c;
}

void save_stats_dump(const Dataset& dataset, const std::vector<FrameMotionStats>& stats,
                     const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    char buf[96];
    for (std::size_t s = 0; s < dataset.size(); ++s) {
        const auto& st = stats[s];
        const int shot_id = dataset[s].shot_id;
        for (int k = 0; k < st.num_transitions(); ++k) {
            const auto ku = static_cast<std::size_t>(k);
            std::snprintf(buf, sizeof(buf), "mstat %d %d %d %.17g %.17g %.17g\n", shot_id, k,
                          st.median_present[ku] ? 1 : 0, st.median_velocity[ku].x,
                          st.median_velocity[ku].y, st.sigma[ku]);
            out << buf;
        }
        for (int f = 0; f < st.num_score_frames(); ++f) {
            std::snprintf(buf, sizeof(buf), "ascore %d %d %.17g\n", shot_id, f,
                          st.articulation_score[static_cast<std::size_t>(f)]);
            out << buf;
        }
    }
}

namespace {

struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error("stage " + stage + ": " + what) {}
};

std::vector<BoWHistogram> interval_bows(const std::vector<Interval>& intervals,
                                        const std::unordered_map<int, std::size_t>& shot_index,
                                        const std::vector<std::vector<int>>& start_frames_per_shot,
                                        const std::vector<std::vector<int>>& codewords_per_shot,
                                        int k) {
    std::vector<BoWHistogram> bows;
    bows.reserve(intervals.size());
    for (const auto& iv : intervals) {
        const std::size_t s = shot_index.at(iv.shot_id);
        std::vector<int> cws;
        const auto& starts = start_frames_per_shot[s];
        const auto& codes = codewords_per_shot[s];
        for (std::size_t i = 0; i < starts.size(); ++i) {
            if (starts[i] >= iv.start_frame && starts[i] < iv.end_frame) {
                cws.push_back(codes[i]);
            }
        }
        bows.push_back(bow(cws, k));
    }
    return bows;
}

void write_manifest(const PipelineConfig& cfg, const std::string& dataset_path,
                    const std::string& out_dir, const std::vector<std::string>& stages,
                    const std::vector<std::pair<std::string, std::string>>& artifacts) {
    json j;
    j["config"] = json::parse(cfg.to_json_string());
    j["config_hash"] = cfg.hash();
    j["dataset"] = dataset_path;
    j["stages"] = stages;
    json arts;
    for (const auto& [name, file] : artifacts) {
        arts[name] = file;
    }
    j["artifacts"] = arts;
    std::ofstream out(out_dir + "/manifest.json");
    if (!out) {
        throw std::runtime_error("cannot write manifest.json in " + out_dir);
    }
    out << j.dump(2) << '\n';
}

std::string svg_polyline(const std::vector<std::pair<double, double>>& pts, const char* color) {
    std::ostringstream ss;
    if (pts.size() > 1) {
        ss << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : pts) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
            ss << buf;
        }
        ss << "\"/>\n";
    }
    for (const auto& [x, y] : pts) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "  <circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n",
                      x, y, color);
        ss << buf;
    }
    return ss.str();
}

}  // namespace

void render_report(const std::string& dir) {
    const std::string metrics_path = dir + "/metrics.csv";
    if (!fs::exists(metrics_path)) {
        throw std::runtime_error("render_report: missing " + metrics_path);
    }
    const auto rows = load_metrics_csv(metrics_path);
    if (rows.empty()) {
        throw std::runtime_error("render_report: " + metrics_path + " has no rows");
    }

    // purity / ARI against k
    const double width = 640, height = 420;
    const double ml = 60, mr = 20, mt = 30, mb = 50;
    int k_min = rows.front().k, k_max = rows.front().k;
    for (const auto& r : rows) {
        k_min = std::min(k_min, r.k);
        k_max = std::max(k_max, r.k);
    }
    const double span = k_max > k_min ? static_cast<double>(k_max - k_min) : 1.0;
    auto xpos = [&](int k) { return ml + (width - ml - mr) * (k - k_min) / span; };
    auto ypos = [&](double v) { return height - mb - (height - mt - mb) * std::clamp(v, 0.0, 1.0); };

    std::vector<std::pair<double, double>> purity_pts, ari_pts;
    for (const auto& r : rows) {
        purity_pts.emplace_back(xpos(r.k), ypos(r.purity));
        ari_pts.emplace_back(xpos(r.k), ypos(r.ari));
    }

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    char buf[256];
    // axes
    std::snprintf(buf, sizeof(buf),
                  "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", ml,
                  height - mb, width - mr, height - mb);
    svg << buf;
    std::snprintf(buf, sizeof(buf),
                  "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", ml,
                  mt, ml, height - mb);
    svg << buf;
    for (double v = 0.0; v <= 1.0001; v += 0.2) {
        std::snprintf(buf, sizeof(buf),
                      "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n"
                      "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.1f</text>\n",
                      ml, ypos(v), width - mr, ypos(v), ml - 6, ypos(v) + 4, v);
        svg << buf;
    }
    const int tick_step = std::max(1, (k_max - k_min) / 10);
    for (int k = k_min; k <= k_max; k += tick_step) {
        std::snprintf(buf, sizeof(buf),
                      "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">%d</text>\n",
                      xpos(k), height - mb + 16, k);
        svg << buf;
    }
    svg << "  <text x=\"" << (width / 2) << "\" y=\"" << (height - 12)
        << "\" font-size=\"12\" text-anchor=\"middle\">number of clusters k</text>\n";
    svg << svg_polyline(purity_pts, "#1f77b4");
    svg << svg_polyline(ari_pts, "#d62728");
    svg << "  <text x=\"" << (width - mr - 120) << "\" y=\"" << (mt + 6)
        << "\" font-size=\"12\" fill=\"#1f77b4\">purity</text>\n";
    svg << "  <text x=\"" << (width - mr - 60) << "\" y=\"" << (mt + 6)
        << "\" font-size=\"12\" fill=\"#d62728\">ARI</text>\n";
    svg << "</svg>\n";

    std::ofstream out(dir + "/report.svg");
    if (!out) {
        throw std::runtime_error("cannot write report.svg in " + dir);
    }
    out << svg.str();

    // Cluster gallery for the lowest swept k, when the artifacts exist.
    const std::string intervals_path = dir + "/intervals.txt";
    char cluster_name[64];
    std::snprintf(cluster_name, sizeof(cluster_name), "clusters.k%d.txt", rows.front().k);
    const std::string clusters_path = dir + "/" + cluster_name;
    const std::string pots_path = dir + "/out.pots";
    if (!fs::exists(intervals_path) || !fs::exists(clusters_path)) {
        return;
    }
    const auto intervals = load_intervals(intervals_path);
    const auto clusters = load_clusters(clusters_path);

    std::unordered_map<int, std::vector<int>> members;  // cluster -> interval indices
    for (const auto& [idx, cid] : clusters.assignments) {
        members[cid].push_back(idx);
    }
    std::vector<PoTRecord> pots;
    if (fs::exists(pots_path)) {
        pots = load_pot_dump(pots_path);
    }

    std::ofstream gal(dir + "/gallery.txt");
    if (!gal) {
        throw std::runtime_error("cannot write gallery.txt in " + dir);
    }
    std::vector<int> cluster_ids;
    for (const auto& [cid, m] : members) {
        cluster_ids.push_back(cid);
    }
    std::sort(cluster_ids.begin(), cluster_ids.end());
    for (int cid : cluster_ids) {
        gal << "cluster " << cid << " size " << members[cid].size() << '\n';
        for (int idx : members[cid]) {
            const auto& iv = intervals[static_cast<std::size_t>(idx)];
            gal << "  item " << idx << " shot " << iv.shot_id << " frames [" << iv.start_frame
                << ", " << iv.end_frame << ") " << origin_name(iv.origin) << '\n';
            int shown = 0;
            for (const auto& p : pots) {
                if (p.shot_id == iv.shot_id && p.start_frame >= iv.start_frame &&
                    p.start_frame < iv.end_frame) {
                    gal << "    overlay frame " << p.start_frame << " anchor " << p.anchor_id
                        << " swing " << p.swing_id << '\n';
                    if (++shown >= 2) {
                        break;
                    }
                }
            }
        }
    }
    // Clusters that received no members at this k are listed with size 0.
    const int total_k = rows.front().k;
    for (int cid = 0; cid < total_k; ++cid) {
        if (!members.count(cid)) {
            gal << "cluster " << cid << " size 0\n";
        }
    }
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::string& dataset_path,
                            const std::string& out_dir, const std::string& stop_after) {
    cfg.validate();
    if (!stop_after.empty() &&
        std::find(kPipelineStages.begin(), kPipelineStages.end(), stop_after) ==
            kPipelineStages.end()) {
        throw std::invalid_argument("unknown stage: " + stop_after);
    }
#ifdef _OPENMP
    if (cfg.threads > 0) {
        omp_set_num_threads(cfg.threads);
    }
#endif
    fs::create_directories(out_dir);

    PipelineResult result;
    result.out_dir = out_dir;
    std::vector<std::pair<std::string, std::string>> artifacts;
    const bool use_ts = std::find(cfg.channels.begin(), cfg.channels.end(), "ts") != cfg.channels.end();
    const bool use_pot = std::find(cfg.channels.begin(), cfg.channels.end(), "pot") != cfg.channels.end();

    const Dataset dataset = load_dataset(dataset_path);
    std::unordered_map<int, std::size_t> shot_index;
    for (std::size_t s = 0; s < dataset.size(); ++s) {
        if (!shot_index.emplace(dataset[s].shot_id, s).second) {
            throw std::runtime_error("dataset has duplicate shot id " +
                                     std::to_string(dataset[s].shot_id));
        }
    }

    // --- stats ---
    std::vector<FrameMotionStats> stats(dataset.size());
    {
        const auto count = static_cast<std::ptrdiff_t>(dataset.size());
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t s = 0; s < count; ++s) {
            stats[static_cast<std::size_t>(s)] =
                compute_frame_motion_stats_serial(dataset[static_cast<std::size_t>(s)], cfg.n);
        }
        save_stats_dump(dataset, stats, out_dir + "/stats.txt");
        artifacts.emplace_back("stats", "stats.txt");
        result.stages_run.push_back("stats");
    }
    if (stop_after == "stats") {
        write_manifest(cfg, dataset_path, out_dir, result.stages_run, artifacts);
        return result;
    }

    // --- pot ---
    std::vector<std::vector<PoTRecord>> pots_per_shot(dataset.size());
    std::vector<std::vector<TsRecord>> ts_per_shot(dataset.size());
    {
        const SelectionConfig sel = cfg.selection_config();
        for (std::size_t s = 0; s < dataset.size(); ++s) {
            try {
                pots_per_shot[s] = extract_pots(dataset[s], stats[s], sel);
                if (use_ts) {
                    ts_per_shot[s] = extract_ts(dataset[s], sel);
                }
            } catch (const std::exception& e) {
                throw StageError("pot", "shot " + std::to_string(dataset[s].shot_id) + ": " + e.what());
            }
        }
        std::vector<PoTRecord> all;
        for (const auto& v : pots_per_shot) {
            all.insert(all.end(), v.begin(), v.end());
        }
        save_pot_dump(all, out_dir + "/out.pots");
        artifacts.emplace_back("pots", "out.pots");
        if (use_ts) {
            std::vector<TsRecord> all_ts;
            for (const auto& v : ts_per_shot) {
                all_ts.insert(all_ts.end(), v.begin(), v.end());
            }
            save_ts_dump(all_ts, out_dir + "/out.ts");
            artifacts.emplace_back("ts", "out.ts");
        }
        result.stages_run.push_back("pot");
    }
    if (stop_after == "pot") {
        write_manifest(cfg, dataset_path, out_dir, result.stages_run, artifacts);
        return result;
    }

    // --- codebook ---
    Codebook pot_cb, ts_cb;
    {
        try {
            if (use_pot) {
                DescriptorMatrix all;
                for (const auto& v : pots_per_shot) {
                    for (const auto& p : v) {
                        all.push(p.descriptor.flatten());
                    }
                }
                const auto sample = sample_descriptors(all, cfg.sample_cap, cfg.seed);
                pot_cb = build_codebook(sample, cfg.kmeans_options(false));
                save_codebook(pot_cb, out_dir + "/codebook.cb");
                artifacts.emplace_back("codebook", "codebook.cb");
            }
            if (use_ts) {
                DescriptorMatrix all;
                for (const auto& v : ts_per_shot) {
                    for (const auto& t : v) {
                        all.push(t.descriptor);
                    }
                }
                const auto sample = sample_descriptors(all, cfg.sample_cap, derive_seed(cfg.seed, 0x7454));
                ts_cb = build_codebook(sample, cfg.kmeans_options(true));
                save_codebook(ts_cb, out_dir + "/ts_codebook.cb");
                artifacts.emplace_back("ts_codebook", "ts_codebook.cb");
            }
        } catch (const std::exception& e) {
            throw StageError("codebook", e.what());
        }
        result.stages_run.push_back("codebook");
    }
    if (stop_after == "codebook") {
        write_manifest(cfg, dataset_path, out_dir, result.stages_run, artifacts);
        return result;
    }

    // Quantize per shot; needed by partition (pot channel) and cluster.
    std::vector<std::vector<int>> pot_codewords(dataset.size());
    std::vector<std::vector<int>> pot_starts(dataset.size());
    if (use_pot) {
        for (std::size_t s = 0; s < dataset.size(); ++s) {
            DescriptorMatrix m;
            for (const auto& p : pots_per_shot[s]) {
                m.push(p.descriptor.flatten());
                pot_starts[s].push_back(p.start_frame);
            }
            pot_codewords[s] = quantize_all(m, pot_cb);
        }
    }
    std::vector<std::vector<int>> ts_codewords(dataset.size());
    std::vector<std::vector<int>> ts_starts(dataset.size());
    if (use_ts) {
        for (std::size_t s = 0; s < dataset.size(); ++s) {
            DescriptorMatrix m;
            for (const auto& t : ts_per_shot[s]) {
                m.push(t.descriptor);
                ts_starts[s].push_back(t.start_frame);
            }
            ts_codewords[s] = quantize_all(m, ts_cb);
        }
    }

    // --- partition --- (driven by the pot channel when present)
    std::vector<Interval> intervals;
    {
        const PartitionConfig pc = cfg.partition_config();
        for (std::size_t s = 0; s < dataset.size(); ++s) {
            try {
                std::vector<Interval> ivs;
                if (use_pot) {
                    ivs = partition_shot(dataset[s], stats[s], pots_per_shot[s], pot_codewords[s],
                                         pot_cb.k, pc);
                } else {
                    // TS-only runs still get pause splitting.
                    std::vector<PoTRecord> no_pots;
                    ivs = partition_shot(dataset[s], stats[s], no_pots, {}, 1, pc);
                }
                intervals.insert(intervals.end(), ivs.begin(), ivs.end());
            } catch (const std::exception& e) {
                throw StageError("partition",
                                 "shot " + std::to_string(dataset[s].shot_id) + ": " + e.what());
            }
        }
        save_intervals(intervals, out_dir + "/intervals.txt");
        artifacts.emplace_back("intervals", "intervals.txt");
        result.stages_run.push_back("partition");
    }
    if (stop_after == "partition") {
        write_manifest(cfg, dataset_path, out_dir, result.stages_run, artifacts);
        return result;
    }

    // --- cluster ---
    Dendrogram dendrogram;
    std::vector<int> kept;  // interval indices that survived the empty filter
    std::vector<std::string> cluster_files;
    {
        try {
            std::vector<std::vector<BoWHistogram>> channel_bows;
            if (use_pot) {
                channel_bows.push_back(
                    interval_bows(intervals, shot_index, pot_starts, pot_codewords, pot_cb.k));
            }
            if (use_ts) {
                channel_bows.push_back(
                    interval_bows(intervals, shot_index, ts_starts, ts_codewords, ts_cb.k));
            }
            for (std::size_t i = 0; i < intervals.size(); ++i) {
                bool ok = true;
                for (const auto& ch : channel_bows) {
                    if (ch[i].empty) {
                        ok = false;
                        break;
                    }
                }
                if (ok) {
                    kept.push_back(static_cast<int>(i));
                }
            }
            if (kept.size() < 2) {
                throw std::runtime_error("fewer than 2 non-empty intervals to cluster");
            }
            std::vector<std::vector<BoWHistogram>> kept_bows(channel_bows.size());
            for (std::size_t c = 0; c < channel_bows.size(); ++c) {
                for (int i : kept) {
                    kept_bows[c].push_back(channel_bows[c][static_cast<std::size_t>(i)]);
                }
            }
            DistanceMatrix dist;
            if (kept_bows.size() == 1) {
                dist = distance_matrix(kept_bows[0]);
            } else {
                DistanceConfig dc;
                dc.channels = cfg.channels;
                dc.channel_norms = compute_channel_norms(kept_bows);
                dist = multichannel_distance_matrix(kept_bows, dc);
            }
            dendrogram = hierarchical_cluster(dist);

            std::vector<int> empties;
            for (std::size_t i = 0; i < intervals.size(); ++i) {
                if (std::find(kept.begin(), kept.end(), static_cast<int>(i)) == kept.end()) {
                    empties.push_back(static_cast<int>(i));
                }
            }
            for (int k : cfg.k_sweep(static_cast<int>(kept.size()))) {
                const auto labels = cut_dendrogram(dendrogram, k);
                ClusterFile cf;
                cf.dendrogram = dendrogram;
                for (std::size_t i = 0; i < kept.size(); ++i) {
                    cf.assignments.emplace_back(kept[i], labels[i]);
                }
                cf.empty_intervals = empties;
                char name[64];
                std::snprintf(name, sizeof(name), "clusters.k%d.txt", k);
                save_clusters(cf, out_dir + "/" + name);
                cluster_files.push_back(name);
                artifacts.emplace_back(name, name);
            }
        } catch (const std::exception& e) {
            throw StageError("cluster", e.what());
        }
        result.stages_run.push_back("cluster");
    }
    if (stop_after == "cluster") {
        write_manifest(cfg, dataset_path, out_dir, result.stages_run, artifacts);
        return result;
    }

    // --- eval ---
    {
        try {
            // Uniformity is a property of the partition, identical per row.
            double uniformity = 0.0;
            int labeled = 0;
            for (const auto& iv : intervals) {
                const Shot& shot = dataset[shot_index.at(iv.shot_id)];
                if (shot.frame_labels) {
                    uniformity += interval_uniformity(iv, *shot.frame_labels);
                    ++labeled;
                }
            }
            uniformity = labeled > 0 ? uniformity / labeled : 0.0;

            for (int k : cfg.k_sweep(static_cast<int>(kept.size()))) {
                char name[64];
                std::snprintf(name, sizeof(name), "clusters.k%d.txt", k);
                const auto cf = load_clusters(out_dir + "/" + name);
                const auto labeled_set = build_labeled_set(intervals, cf.assignments, dataset);
                MetricsRow row;
                row.k = k;
                row.purity = purity(labeled_set.predicted, labeled_set.truth);
                row.ari = adjusted_rand_index(labeled_set.predicted, labeled_set.truth);
                row.num_intervals = static_cast<int>(labeled_set.predicted.size());
                row.uniformity = uniformity;
                result.metrics.push_back(row);
            }
            save_metrics_csv(result.metrics, out_dir + "/metrics.csv");
            artifacts.emplace_back("metrics", "metrics.csv");

            // Distinct-shot interval counts per behavior.
            std::vector<std::string> majority;
            std::vector<Interval> labeled_intervals;
            for (const auto& iv : intervals) {
                const Shot& shot = dataset[shot_index.at(iv.shot_id)];
                if (shot.frame_labels) {
                    labeled_intervals.push_back(iv);
                    majority.push_back(majority_label(iv, *shot.frame_labels));
                }
            }
            const auto counts = count_intervals_per_behavior(labeled_intervals, majority);
            std::ofstream cout_file(out_dir + "/counts.txt");
            for (const auto& [behavior, count] : counts) {
                cout_file << "count " << behavior << ' ' << count << '\n';
            }
            artifacts.emplace_back("counts", "counts.txt");
        } catch (const std::exception& e) {
            throw StageError("eval", e.what());
        }
        result.stages_run.push_back("eval");
    }
    if (stop_after == "eval") {
        write_manifest(cfg, dataset_path, out_dir, result.stages_run, artifacts);
        return result;
    }

    // --- report ---
    {
        try {
            render_report(out_dir);
        } catch (const std::exception& e) {
            throw StageError("report", e.what());
        }
        artifacts.emplace_back("report", "report.svg");
        artifacts.emplace_back("gallery", "gallery.txt");
        result.stages_run.push_back("report");
    }
    write_manifest(cfg, dataset_path, out_dir, result.stages_run, artifacts);
    return result;
}

}  // namespace potminer
