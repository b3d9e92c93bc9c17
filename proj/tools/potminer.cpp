#include "potminer/cluster.hpp"
#include "potminer/codebook.hpp"
#include "potminer/dataset_io.hpp"
#include "potminer/evalmetrics.hpp"
#include "potminer/partition.hpp"
#include "potminer/pipeline.hpp"
#include "potminer/pot.hpp"
#include "potminer/rng.hpp"
#include "potminer/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace potminer;

struct KRange {
    int lo = 0;
    int hi = 0;
    bool set() const { return lo > 0; }
};

KRange parse_k_range(const std::string& s) {
    KRange r;
    if (std::sscanf(s.c_str(), "%d:%d", &r.lo, &r.hi) != 2 || r.lo < 1 || r.hi < r.lo) {
        throw CLI::ValidationError("--k-range", "expected lo:hi with 1 <= lo <= hi");
    }
    return r;
}

Dataset synth_dataset(const std::string& script_path, int shots, std::uint64_t seed) {
    synth::SynthConfig sc;
    if (!script_path.empty()) {
        sc = synth::load_synth_config(script_path);
    } else {
        sc.has_sampler = true;
        sc.sampler = synth::default_sampler();
        sc.background.count = 6;
    }
    Dataset out;
    if (sc.has_sampler) {
        const auto generated =
            synth::generate_dataset(sc.sampler, shots, seed, sc.noise_std, sc.background);
        for (const auto& g : generated) {
            out.push_back(g.shot);
        }
    } else {
        for (int i = 0; i < shots; ++i) {
            synth::BehaviorScript script;
            script.segments = sc.segments;
            script.scale = sc.scale;
            script.noise_std = sc.noise_std;
            script.background = sc.background;
            out.push_back(synth::generate_shot(script, derive_seed(seed, static_cast<std::uint64_t>(i)), i).shot);
        }
    }
    return out;
}

// Shared across the pot/partition/cluster subcommands.
struct ShotData {
    Dataset dataset;
    std::vector<FrameMotionStats> stats;
    std::vector<std::vector<PoTRecord>> pots_per_shot;
    std::vector<std::vector<int>> codewords_per_shot;
};

ShotData load_with_pots(const std::string& traj_path, const std::string& pots_path,
                        const Codebook* cb, int n) {
    ShotData d;
    d.dataset = load_dataset(traj_path);
    std::unordered_map<int, std::size_t> index;
    for (std::size_t s = 0; s < d.dataset.size(); ++s) {
        index.emplace(d.dataset[s].shot_id, s);
        d.stats.push_back(compute_frame_motion_stats(d.dataset[s], n));
    }
    d.pots_per_shot.resize(d.dataset.size());
    for (auto& p : load_pot_dump(pots_path)) {
        const auto it = index.find(p.shot_id);
        if (it == index.end()) {
            throw std::runtime_error("pot dump references unknown shot " + std::to_string(p.shot_id));
        }
        d.pots_per_shot[it->second].push_back(std::move(p));
    }
    if (cb) {
        d.codewords_per_shot.resize(d.dataset.size());
        for (std::size_t s = 0; s < d.dataset.size(); ++s) {
            DescriptorMatrix m;
            for (const auto& p : d.pots_per_shot[s]) {
                m.push(p.descriptor.flatten());
            }
            d.codewords_per_shot[s] = quantize_all(m, *cb);
        }
    }
    return d;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"potminer: unsupervised articulated-motion discovery from point trajectories"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP thread count (0 = library default)");

    std::string config_path;

    // --- synth ---
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic articulated dataset");
    std::string synth_script, synth_out;
    int synth_shots = 60;
    std::uint64_t synth_seed = 7;
    synth_cmd->add_option("--script", synth_script, "behavior script / sampler config (JSON)");
    synth_cmd->add_option("--shots", synth_shots, "number of shots")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth_seed, "RNG seed");
    synth_cmd->add_option("output", synth_out, "output dataset file")->required();

    // --- stats ---
    auto* stats_cmd = app.add_subcommand("stats", "per-frame motion statistics dump");
    std::string stats_in, stats_out;
    int stats_n = 10;
    stats_cmd->add_option("input", stats_in, "dataset file")->required()->check(CLI::ExistingFile);
    stats_cmd->add_option("output", stats_out, "stats dump")->required();
    stats_cmd->add_option("-n,--window", stats_n, "PoT window length");

    // --- pot ---
    auto* pot_cmd = app.add_subcommand("pot", "select PoTs and write the descriptor dump");
    std::string pot_in, pot_out, pot_ts_out;
    PipelineConfig pot_cfg;
    pot_cmd->add_option("input", pot_in, "dataset file")->required()->check(CLI::ExistingFile);
    pot_cmd->add_option("output", pot_out, "pot dump")->required();
    pot_cmd->add_option("--config", config_path, "pipeline config (JSON)");
    pot_cmd->add_option("--ts", pot_ts_out, "also write a TS baseline dump here");
    pot_cmd->add_option("--theta-p", pot_cfg.theta_p, "retention fraction");
    pot_cmd->add_option("--theta-f", pot_cfg.theta_f, "articulation floor");
    pot_cmd->add_option("-n,--window", pot_cfg.n, "PoT window length");

    // --- codebook ---
    auto* cb_cmd = app.add_subcommand("codebook", "k-means codebook over a descriptor dump");
    std::string cb_in, cb_out;
    KMeansOptions cb_opts;
    std::size_t cb_cap = 1000000;
    cb_cmd->add_option("input", cb_in, "pot or ts dump")->required()->check(CLI::ExistingFile);
    cb_cmd->add_option("output", cb_out, "codebook file")->required();
    cb_cmd->add_option("--k", cb_opts.k, "codeword count")->check(CLI::PositiveNumber);
    cb_cmd->add_option("--restarts", cb_opts.restarts, "k-means restarts");
    cb_cmd->add_option("--seed", cb_opts.seed, "RNG seed");
    cb_cmd->add_option("--sample-cap", cb_cap, "training sample cap");
    cb_cmd->add_flag("--kmeanspp", cb_opts.kmeanspp, "k-means++ seeding");
    cb_cmd->add_flag("--standardize", cb_opts.standardize, "per-component standardization");

    // --- partition ---
    auto* part_cmd = app.add_subcommand("partition", "split shots into single-pattern intervals");
    std::string part_traj, part_pots, part_cb, part_out;
    PipelineConfig part_cfg;
    part_cmd->add_option("dataset", part_traj, "dataset file")->required()->check(CLI::ExistingFile);
    part_cmd->add_option("pots", part_pots, "pot dump")->required()->check(CLI::ExistingFile);
    part_cmd->add_option("codebook", part_cb, "codebook file")->required()->check(CLI::ExistingFile);
    part_cmd->add_option("output", part_out, "interval list")->required();
    part_cmd->add_option("--config", config_path, "pipeline config (JSON)");
    part_cmd->add_option("--theta-h", part_cfg.theta_h, "peak threshold");
    part_cmd->add_option("--theta-f", part_cfg.theta_f, "pause dispersion floor");
    part_cmd->add_flag("--span-indexing", part_cfg.span_indexing,
                       "BoW sequences aggregate PoTs spanning t instead of starting at t");

    // --- cluster ---
    auto* cl_cmd = app.add_subcommand("cluster", "complete-linkage clustering of intervals");
    std::string cl_intervals, cl_pots, cl_cb, cl_out, cl_krange_str;
    std::string cl_ts_pots, cl_ts_cb;
    int cl_k = 0, cl_n = 10;
    cl_cmd->add_option("intervals", cl_intervals, "interval list")->required()->check(CLI::ExistingFile);
    cl_cmd->add_option("pots", cl_pots, "pot dump")->required()->check(CLI::ExistingFile);
    cl_cmd->add_option("codebook", cl_cb, "codebook file")->required()->check(CLI::ExistingFile);
    cl_cmd->add_option("output", cl_out, "cluster file (sweeps append .k<k>)")->required();
    cl_cmd->add_option("--k", cl_k, "cluster count");
    cl_cmd->add_option("--k-range", cl_krange_str, "cluster count sweep lo:hi");
    cl_cmd->add_option("--ts-pots", cl_ts_pots, "TS dump for a second channel");
    cl_cmd->add_option("--ts-codebook", cl_ts_cb, "TS codebook for a second channel");
    cl_cmd->add_option("-n,--window", cl_n, "PoT window length (for dataset joins)");

    // --- eval ---
    auto* eval_cmd = app.add_subcommand("eval", "purity, ARI, uniformity and behavior counts");
    std::string eval_traj, eval_intervals, eval_csv, eval_counts;
    std::vector<std::string> eval_cluster_files;
    eval_cmd->add_option("dataset", eval_traj, "labeled dataset")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("intervals", eval_intervals, "interval list")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("output", eval_csv, "metrics CSV")->required();
    eval_cmd->add_option("clusters", eval_cluster_files, "one or more cluster files")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--counts", eval_counts, "also write per-behavior distinct-shot counts");

    // --- report ---
    auto* report_cmd = app.add_subcommand("report", "render report.svg and gallery.txt");
    std::string report_dir;
    report_cmd->add_option("artifacts", report_dir, "artifacts directory")
        ->required()
        ->check(CLI::ExistingDirectory);

    // --- pipeline ---
    auto* pipe_cmd = app.add_subcommand("pipeline", "run every stage into an artifacts directory");
    std::string pipe_in, pipe_out, pipe_stage, pipe_krange_str;
    PipelineConfig pipe_cfg;
    int pipe_k = 0;
    pipe_cmd->add_option("dataset", pipe_in, "dataset file")->required()->check(CLI::ExistingFile);
    pipe_cmd->add_option("--out", pipe_out, "artifacts directory")->required();
    pipe_cmd->add_option("--config", config_path, "pipeline config (JSON)");
    pipe_cmd->add_option("--stage", pipe_stage, "stop after this stage");
    pipe_cmd->add_option("--k", pipe_k, "cluster count");
    pipe_cmd->add_option("--k-range", pipe_krange_str, "cluster count sweep lo:hi");
    pipe_cmd->add_option("--seed", pipe_cfg.seed, "RNG seed");
    pipe_cmd->add_option("--theta-p", pipe_cfg.theta_p, "retention fraction");
    pipe_cmd->add_option("--theta-f", pipe_cfg.theta_f, "articulation floor");
    pipe_cmd->add_option("--theta-h", pipe_cfg.theta_h, "peak threshold");
    pipe_cmd->add_option("--codebook-k", pipe_cfg.codebook_k, "PoT codebook size");
    pipe_cmd->add_option("--restarts", pipe_cfg.restarts, "k-means restarts");
    std::vector<std::string> pipe_channels;
    pipe_cmd->add_option("--channels", pipe_channels, "feature channels (pot, ts)");

    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    if (threads > 0) {
        omp_set_num_threads(threads);
    }
#endif

    try {
        if (*synth_cmd) {
            save_dataset(synth_dataset(synth_script, synth_shots, synth_seed), synth_out);
        } else if (*stats_cmd) {
            const auto dataset = load_dataset(stats_in);
            std::vector<FrameMotionStats> stats;
            for (const auto& shot : dataset) {
                stats.push_back(compute_frame_motion_stats(shot, stats_n));
            }
            save_stats_dump(dataset, stats, stats_out);
        } else if (*pot_cmd) {
            PipelineConfig cfg = config_path.empty() ? pot_cfg : PipelineConfig::from_json_file(config_path);
            if (!config_path.empty()) {
                // explicit flags win over the config file
                if (pot_cmd->count("--theta-p")) cfg.theta_p = pot_cfg.theta_p;
                if (pot_cmd->count("--theta-f")) cfg.theta_f = pot_cfg.theta_f;
                if (pot_cmd->count("-n")) cfg.n = pot_cfg.n;
            }
            const auto dataset = load_dataset(pot_in);
            const SelectionConfig sel = cfg.selection_config();
            std::vector<PoTRecord> all;
            std::vector<TsRecord> all_ts;
            for (const auto& shot : dataset) {
                const auto stats = compute_frame_motion_stats(shot, sel.n);
                const auto pots = extract_pots(shot, stats, sel);
                all.insert(all.end(), pots.begin(), pots.end());
                if (!pot_ts_out.empty()) {
                    const auto ts = extract_ts(shot, sel);
                    all_ts.insert(all_ts.end(), ts.begin(), ts.end());
                }
            }
            save_pot_dump(all, pot_out);
            if (!pot_ts_out.empty()) {
                save_ts_dump(all_ts, pot_ts_out);
            }
        } else if (*cb_cmd) {
            DescriptorMatrix m;
            std::ifstream probe(cb_in);
            std::string first_tag;
            probe >> first_tag;
            if (first_tag == "ts") {
                for (const auto& t : load_ts_dump(cb_in)) {
                    m.push(t.descriptor);
                }
            } else {
                for (const auto& p : load_pot_dump(cb_in)) {
                    m.push(p.descriptor.flatten());
                }
            }
            const auto sample = sample_descriptors(m, cb_cap, cb_opts.seed);
            save_codebook(build_codebook(sample, cb_opts), cb_out);
        } else if (*part_cmd) {
            PipelineConfig cfg =
                config_path.empty() ? part_cfg : PipelineConfig::from_json_file(config_path);
            if (!config_path.empty()) {
                if (part_cmd->count("--theta-h")) cfg.theta_h = part_cfg.theta_h;
                if (part_cmd->count("--theta-f")) cfg.theta_f = part_cfg.theta_f;
                if (part_cmd->count("--span-indexing")) cfg.span_indexing = part_cfg.span_indexing;
            }
            const Codebook cb = load_codebook(part_cb);
            const auto data = load_with_pots(part_traj, part_pots, &cb, cfg.n);
            const PartitionConfig pc = cfg.partition_config();
            std::vector<Interval> intervals;
            for (std::size_t s = 0; s < data.dataset.size(); ++s) {
                const auto ivs = partition_shot(data.dataset[s], data.stats[s], data.pots_per_shot[s],
                                                data.codewords_per_shot[s], cb.k, pc);
                intervals.insert(intervals.end(), ivs.begin(), ivs.end());
            }
            save_intervals(intervals, part_out);
        } else if (*cl_cmd) {
            if ((cl_k == 0) == cl_krange_str.empty()) {
                throw std::runtime_error("cluster: give exactly one of --k or --k-range");
            }
            const Codebook cb = load_codebook(cl_cb);
            const auto intervals = load_intervals(cl_intervals);
            const auto pots = load_pot_dump(cl_pots);
            DescriptorMatrix m;
            for (const auto& p : pots) {
                m.push(p.descriptor.flatten());
            }
            const auto codes = quantize_all(m, cb);

            std::vector<std::vector<BoWHistogram>> channel_bows(1);
            for (const auto& iv : intervals) {
                std::vector<int> cws;
                for (std::size_t i = 0; i < pots.size(); ++i) {
                    if (pots[i].shot_id == iv.shot_id && pots[i].start_frame >= iv.start_frame &&
                        pots[i].start_frame < iv.end_frame) {
                        cws.push_back(codes[i]);
                    }
                }
                channel_bows[0].push_back(bow(cws, cb.k));
            }
            std::vector<std::string> channel_names{"pot"};
            if (!cl_ts_pots.empty()) {
                if (cl_ts_cb.empty()) {
                    throw std::runtime_error("cluster: --ts-pots needs --ts-codebook");
                }
                const Codebook tscb = load_codebook(cl_ts_cb);
                const auto ts = load_ts_dump(cl_ts_pots);
                DescriptorMatrix tm;
                for (const auto& t : ts) {
                    tm.push(t.descriptor);
                }
                const auto tcodes = quantize_all(tm, tscb);
                std::vector<BoWHistogram> tbows;
                for (const auto& iv : intervals) {
                    std::vector<int> cws;
                    for (std::size_t i = 0; i < ts.size(); ++i) {
                        if (ts[i].shot_id == iv.shot_id && ts[i].start_frame >= iv.start_frame &&
                            ts[i].start_frame < iv.end_frame) {
                            cws.push_back(tcodes[i]);
                        }
                    }
                    tbows.push_back(bow(cws, tscb.k));
                }
                channel_bows.push_back(std::move(tbows));
                channel_names.push_back("ts");
            }

            std::vector<int> kept, empties;
            for (std::size_t i = 0; i < intervals.size(); ++i) {
                bool ok = true;
                for (const auto& ch : channel_bows) {
                    if (ch[i].empty) ok = false;
                }
                (ok ? kept : empties).push_back(static_cast<int>(i));
            }
            if (kept.size() < 2) {
                throw std::runtime_error("cluster: fewer than 2 non-empty intervals");
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
                dc.channels = channel_names;
                dc.channel_norms = compute_channel_norms(kept_bows);
                dist = multichannel_distance_matrix(kept_bows, dc);
            }
            const auto dendro = hierarchical_cluster(dist);
            KRange kr;
            if (cl_k > 0) {
                kr.lo = kr.hi = cl_k;
            } else {
                kr = parse_k_range(cl_krange_str);
            }
            for (int k = kr.lo; k <= std::min(kr.hi, static_cast<int>(kept.size())); ++k) {
                ClusterFile cf;
                cf.dendrogram = dendro;
                const auto labels = cut_dendrogram(dendro, k);
                for (std::size_t i = 0; i < kept.size(); ++i) {
                    cf.assignments.emplace_back(kept[i], labels[i]);
                }
                cf.empty_intervals = empties;
                const std::string path =
                    kr.lo == kr.hi ? cl_out : cl_out + ".k" + std::to_string(k);
                save_clusters(cf, path);
            }
        } else if (*eval_cmd) {
            const auto dataset = load_dataset(eval_traj);
            const auto intervals = load_intervals(eval_intervals);
            std::unordered_map<int, const Shot*> shots;
            for (const auto& s : dataset) {
                shots.emplace(s.shot_id, &s);
            }
            double uniformity = 0.0;
            int labeled = 0;
            std::vector<Interval> labeled_ivs;
            std::vector<std::string> majority;
            for (const auto& iv : intervals) {
                const Shot* s = shots.at(iv.shot_id);
                if (s->frame_labels) {
                    uniformity += interval_uniformity(iv, *s->frame_labels);
                    labeled_ivs.push_back(iv);
                    majority.push_back(majority_label(iv, *s->frame_labels));
                    ++labeled;
                }
            }
            uniformity = labeled > 0 ? uniformity / labeled : 0.0;
            std::vector<MetricsRow> rows;
            for (const auto& path : eval_cluster_files) {
                const auto cf = load_clusters(path);
                const auto set = build_labeled_set(intervals, cf.assignments, dataset);
                int k = 0;
                for (const auto& [idx, cid] : cf.assignments) {
                    k = std::max(k, cid + 1);
                }
                MetricsRow r;
                r.k = k;
                r.purity = purity(set.predicted, set.truth);
                r.ari = adjusted_rand_index(set.predicted, set.truth);
                r.num_intervals = static_cast<int>(set.predicted.size());
                r.uniformity = uniformity;
                rows.push_back(r);
            }
            std::sort(rows.begin(), rows.end(),
                      [](const MetricsRow& a, const MetricsRow& b) { return a.k < b.k; });
            save_metrics_csv(rows, eval_csv);
            if (!eval_counts.empty()) {
                const auto counts = count_intervals_per_behavior(labeled_ivs, majority);
                std::ofstream out(eval_counts);
                for (const auto& [behavior, count] : counts) {
                    out << "count " << behavior << ' ' << count << '\n';
                }
            }
        } else if (*report_cmd) {
            render_report(report_dir);
        } else if (*pipe_cmd) {
            PipelineConfig cfg =
                config_path.empty() ? PipelineConfig{} : PipelineConfig::from_json_file(config_path);
            if (pipe_cmd->count("--seed")) cfg.seed = pipe_cfg.seed;
            if (pipe_cmd->count("--theta-p")) cfg.theta_p = pipe_cfg.theta_p;
            if (pipe_cmd->count("--theta-f")) cfg.theta_f = pipe_cfg.theta_f;
            if (pipe_cmd->count("--theta-h")) cfg.theta_h = pipe_cfg.theta_h;
            if (pipe_cmd->count("--codebook-k")) cfg.codebook_k = pipe_cfg.codebook_k;
            if (pipe_cmd->count("--restarts")) cfg.restarts = pipe_cfg.restarts;
            if (!pipe_channels.empty()) cfg.channels = pipe_channels;
            if (pipe_k > 0) {
                cfg.k_lo = cfg.k_hi = pipe_k;
            } else if (!pipe_krange_str.empty()) {
                const auto kr = parse_k_range(pipe_krange_str);
                cfg.k_lo = kr.lo;
                cfg.k_hi = kr.hi;
            }
            if (threads > 0) {
                cfg.threads = threads;
            }
            run_pipeline(cfg, pipe_in, pipe_out, pipe_stage);
        }
    } catch (const std::exception& e) {
        std::cerr << "potminer: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
