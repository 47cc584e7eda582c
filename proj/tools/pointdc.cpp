// pointdc command line: synth | partition | distill | svc | baseline | eval | probe

#include "pointdc/pointdc.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace pointdc;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kInvalid = 3, kIo = 4, kNumeric = 5, kMissing = 6 };

struct CliError : std::runtime_error {
    int code;
    CliError(int c, const std::string& m) : std::runtime_error(m), code(c) {}
};

struct Options {
    std::string config, out, data, checkpoint;
    std::optional<long> seed;
    std::vector<std::string> overrides;
};

// defaults < dataset echo < --config < --seed < --set
RunConfig effective_config(const Options& o, bool with_data) {
    RunConfig cfg;
    if (with_data) cfg.merge_text(load_config_echo(o.data).to_text());
    if (!o.config.empty()) {
        if (!fs::exists(o.config)) throw CliError(kMissing, "missing config '" + o.config + "'");
        cfg.merge_text(codec::read_file(o.config));
    }
    if (o.seed) cfg.set("seed", std::to_string(*o.seed));
    for (const std::string& kv : o.overrides) cfg.merge_assignment(kv);
    return cfg;
}

void need(const std::string& value, const std::string& what) {
    if (value.empty()) throw CliError(kMissing, "missing " + what);
}

Dataset open_dataset(const Options& o) {
    need(o.data, "dataset");
    if (!fs::exists(fs::path(o.data) / "manifest.txt")) throw CliError(kMissing, "missing dataset '" + o.data + "'");
    return load_dataset(o.data);
}

codec::Checkpoint open_checkpoint(const std::string& path) {
    if (path.empty() || !fs::exists(path)) throw CliError(kMissing, "missing checkpoint");
    return codec::decode_checkpoint(codec::read_file(path));
}

PointFeatureNet initial_net(const Options& o, const RunConfig& cfg) {
    if (!o.checkpoint.empty()) return codec::restore_net(open_checkpoint(o.checkpoint));
    return PointFeatureNet(net_shape(cfg), derive_seed(cfg.seed(), 10));
}

std::string fixed(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

std::string iteration_table(const std::vector<IterationReport>& its) {
    std::ostringstream os;
    os << "# iteration kmeans_objective loss miou accuracy\n";
    for (std::size_t i = 0; i < its.size(); ++i) {
        const IterationReport& r = its[i];
        os << i + 1 << ' ' << fixed(r.kmeans_objective) << ' ' << fixed(r.loss) << ' '
           << (r.metrics ? fixed(r.metrics->miou) : "n/a") << ' ' << (r.metrics ? fixed(r.metrics->accuracy) : "n/a")
           << "\n";
    }
    return os.str();
}

void run_synth(const Options& o) {
    need(o.out, "output directory");
    const RunConfig cfg = effective_config(o, false);
    write_dataset(synthesize_dataset(cfg), cfg, o.out);
}

void run_partition(const Options& o) {
    need(o.out, "output directory");
    Dataset ds = open_dataset(o);
    const RunConfig cfg = effective_config(o, true);
    const PartitionStrategy strategy = partition_strategy(cfg);
    for (Scene& s : ds.scenes) s.partition = partition(s.cloud, strategy);
    write_dataset(ds, cfg, o.out);
}

void run_distill(const Options& o) {
    need(o.out, "output directory");
    const Dataset ds = open_dataset(o);
    const RunConfig cfg = effective_config(o, true);
    PointFeatureNet net = initial_net(o, cfg);
    const DistillReport rep = run_cmd(ds, net, distill_config(cfg));
    std::ostringstream loss;
    loss << "# epoch loss\n";
    for (std::size_t e = 0; e < rep.epoch_loss.size(); ++e) loss << e + 1 << ' ' << fixed(rep.epoch_loss[e]) << "\n";
    RunWriter w(o.out, "distill");
    w.add("config.cfg", cfg.to_text());
    w.add("checkpoint.pdck", codec::encode_checkpoint(codec::make_checkpoint(net)));
    w.add("loss.txt", loss.str());
    w.commit();
}

void run_svc_command(const Options& o) {
    need(o.out, "output directory");
    const Dataset ds = open_dataset(o);
    const RunConfig cfg = effective_config(o, true);
    PointFeatureNet net = initial_net(o, cfg);
    const SvcReport rep = run_svc(net, ds, svc_config(cfg, ds.classes));
    RunWriter w(o.out, "svc");
    w.add("config.cfg", cfg.to_text());
    w.add("checkpoint.pdck", codec::encode_checkpoint(codec::make_checkpoint(net, {{"centroids", rep.centroids}})));
    w.add("report.txt", iteration_table(rep.iterations));
    w.commit();
}

void run_baseline_command(const Options& o) {
    need(o.out, "output directory");
    const Dataset ds = open_dataset(o);
    const RunConfig cfg = effective_config(o, true);
    PointFeatureNet net = initial_net(o, cfg);
    const BaselineReport rep = run_baseline_deepcluster(net, ds, svc_config(cfg, ds.classes));
    RunWriter w(o.out, "baseline");
    w.add("config.cfg", cfg.to_text());
    w.add("checkpoint.pdck", codec::encode_checkpoint(codec::make_checkpoint(net, rep.head)));
    w.add("report.txt", iteration_table(rep.iterations));
    w.commit();
}

// A checkpoint with a head predicts by argmax; otherwise points take the
// nearest super-voxel k-means centroid (warm-started from stored centroids).
void run_eval(const Options& o) {
    need(o.out, "output directory");
    const codec::Checkpoint ck = open_checkpoint(o.checkpoint);
    const Dataset ds = open_dataset(o);
    const RunConfig cfg = effective_config(o, true);
    if (!has_labels(ds)) throw CliError(kInvalid, "dataset has no ground-truth labels");
    const PointFeatureNet net = codec::restore_net(ck);
    const SvcConfig sc = svc_config(cfg, ds.classes);
    std::vector<int> pred;
    if (ck.extra("head.weight") && ck.extra("head.bias")) {
        pred = predict_with_head(net, {{"head.weight", *ck.extra("head.weight")}, {"head.bias", *ck.extra("head.bias")}}, ds);
    } else {
        std::optional<Matrix> warm;
        if (const Matrix* c = ck.extra("centroids"); c && c->rows() == Eigen::Index(sc.clusters)) warm = *c;
        pred = cluster_and_predict(net, ds, sc, derive_seed(cfg.seed(), 14), warm).labels;
    }
    const MetricsReport rep = evaluate_clustering(pred, ds.all_labels(), sc.clusters);
    RunWriter w(o.out, "eval");
    w.add("config.cfg", cfg.to_text());
    w.add("metrics.txt", rep.to_text());
    w.commit();
}

void run_probe(const Options& o) {
    need(o.out, "output directory");
    const codec::Checkpoint ck = open_checkpoint(o.checkpoint);
    const Dataset ds = open_dataset(o);
    const RunConfig cfg = effective_config(o, true);
    if (!has_labels(ds)) throw CliError(kInvalid, "dataset has no ground-truth labels");
    const PointFeatureNet net = codec::restore_net(ck);
    const ProbeResult res = linear_probe(stack_rows(scene_features(net, ds)), ds.all_labels(), probe_config(cfg, ds.classes));
    RunWriter w(o.out, "probe");
    w.add("config.cfg", cfg.to_text());
    w.add("metrics.txt", res.report.to_text());
    w.commit();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PointDC: unsupervised point-cloud segmentation by distillation and super-voxel clustering"};
    app.require_subcommand(1);
    app.footer("Configuration keys:\n" + RunConfig().describe());
    Options o;
    struct Command {
        const char* name;
        const char* help;
        void (*fn)(const Options&);
        bool data, checkpoint;
    };
    const Command commands[] = {
        {"synth", "generate a synthetic dataset", run_synth, false, false},
        {"partition", "recompute super-voxel partitions", run_partition, true, false},
        {"distill", "cross-modal distillation training", run_distill, true, true},
        {"svc", "super-voxel clustering training", run_svc_command, true, true},
        {"baseline", "point-level deep clustering baseline", run_baseline_command, true, true},
        {"eval", "Hungarian-matched segmentation metrics", run_eval, true, true},
        {"probe", "linear probe on frozen features", run_probe, true, true},
    };
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const Command& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", o.config, "configuration file (key = value lines)");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "override the master seed");
        sub->add_option("--set", o.overrides, "override one key (key=value), repeatable");
        if (c.data) sub->add_option("--data", o.data, "dataset directory");
        if (c.checkpoint) sub->add_option("--checkpoint,--init", o.checkpoint, "network checkpoint (.pdck)");
        subs.emplace_back(sub, &c);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    try {
        for (const auto& [sub, cmd] : subs)
            if (sub->parsed()) cmd->fn(o);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kOk;
}
