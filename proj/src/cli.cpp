#include "mcrl/cli.hpp"

#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "mcrl/adapt.hpp"
#include "mcrl/gradcheck.hpp"
#include "mcrl/grid.hpp"
#include "mcrl/report.hpp"

namespace mcrl {

namespace {

// Thrown for bad flag combinations detected after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainFlags {
    std::optional<std::uint64_t> seed;
    AdaptConfig cfg;
    std::string policy = "soft";
    std::size_t k = 3;
    double threshold = 1.2;
    std::string mode = "two_stage";
    std::string bandwidth = "median";
    std::string scaling = "per_class_sum";
    std::size_t hidden = 64;
    std::size_t feat = 32;
    bool timing = false;
};

void add_training_flags(CLI::App* cmd, TrainFlags& f, bool adaptation) {
    cmd->add_option("--seed", f.seed, "Seed for initialization and batch order")->required();
    cmd->add_option("--lr", f.cfg.lr, "SGD learning rate")->capture_default_str();
    cmd->add_option("--momentum", f.cfg.momentum, "SGD momentum")->capture_default_str();
    cmd->add_option("--epochs", f.cfg.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch-size", f.cfg.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--steps-per-epoch", f.cfg.steps_per_epoch, "Steps per epoch (0: one data pass)")
        ->capture_default_str();
    cmd->add_flag("--freeze-g", f.cfg.freeze_g, "Train only the classifier head");
    cmd->add_option("--hidden", f.hidden, "Hidden width of the feature transform")->capture_default_str();
    cmd->add_option("--feat", f.feat, "Feature dimension")->capture_default_str();
    cmd->add_flag("--timing", f.timing, "Record wall-clock time in the report");
    if (!adaptation) return;
    cmd->add_option("--lambda", f.cfg.lambda, "Weight of the alignment loss")->capture_default_str();
    cmd->add_flag("--lambda-ramp", f.cfg.lambda_ramp, "Ramp lambda up over training");
    cmd->add_option("--policy", f.policy, "Cluster selection policy")
        ->check(CLI::IsMember({"single", "hard", "soft", "ratio"}))
        ->capture_default_str();
    cmd->add_option("--k", f.k, "Clusters per sample for hard/soft")->capture_default_str();
    cmd->add_option("--threshold", f.threshold, "Top-2 ratio threshold for ratio")->capture_default_str();
    cmd->add_option("--mode", f.mode, "Training protocol")
        ->check(CLI::IsMember({"two_stage", "end_to_end"}))
        ->capture_default_str();
    cmd->add_option("--bandwidth", f.bandwidth, "Kernel bandwidth rule")
        ->check(CLI::IsMember({"median", "fixed"}))
        ->capture_default_str();
    cmd->add_option("--sigma2", f.cfg.kernel.fixed_sigma2, "Bandwidth for --bandwidth fixed")->capture_default_str();
    cmd->add_option("--kernel-multipliers", f.cfg.kernel.multipliers, "Bandwidth multipliers")->delimiter(',');
    cmd->add_option("--weight-scaling", f.scaling, "Target weight scaling")
        ->check(CLI::IsMember({"per_class_sum", "literal_inverse_nt"}))
        ->capture_default_str();
    cmd->add_option("--min-cluster-size", f.cfg.kernel.min_cluster_size, "Smallest usable source cluster")
        ->capture_default_str();
    cmd->add_flag("--global-clusters", f.cfg.global_clusters, "Draw source clusters from the whole source set");
    cmd->add_option("--cluster-samples", f.cfg.cluster_samples_per_class, "Per-class draw for --global-clusters")
        ->capture_default_str();
}

AdaptConfig resolve_config(TrainFlags& f) {
    AdaptConfig c = f.cfg;
    c.seed = *f.seed;
    c.policy = parse_policy(f.policy, f.k, f.threshold);
    c.mode = f.mode == "end_to_end" ? AdaptMode::end_to_end : AdaptMode::two_stage;
    c.kernel.bandwidth_rule = f.bandwidth == "fixed" ? BandwidthRule::fixed : BandwidthRule::median_heuristic;
    c.kernel.weight_scaling =
        f.scaling == "literal_inverse_nt" ? WeightScaling::literal_inverse_nt : WeightScaling::per_class_sum;
    c.validate();
    return c;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(f), {});
}

EmbeddingDataset load_source(const std::string& path) {
    return load_csv(path, CsvSchema{std::nullopt, CsvSchema::Labels::required, std::nullopt});
}

// Target files may carry labels; they are kept for evaluation only.
EmbeddingDataset load_target(const std::string& path, const EmbeddingDataset& source) {
    EmbeddingDataset t = load_csv(path, CsvSchema{source.dim(), CsvSchema::Labels::optional, source.classes()});
    return t.has_labels() ? t.with_hidden_labels() : t;
}

ModelParams starting_model(const std::string& init_path, const EmbeddingDataset& source, const TrainFlags& f) {
    if (init_path.empty()) return init_model({source.dim(), f.hidden, f.feat, source.classes()}, *f.seed);
    const Checkpoint ck = load_checkpoint(init_path);
    bind_checkpoint(ck, source.dim(), source.classes());
    return ck.params;
}

struct Outputs {
    std::string report;
    std::string checkpoint;
};

void emit(std::ostream& out, const Outputs& o, const std::string& json, const std::string& table) {
    out << table;
    if (!o.report.empty()) write_file(o.report, json);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-cluster reference learning for unsupervised domain adaptation", "mcrl"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", kLibraryVersion);

    // generate
    std::string preset, spec_path, out_dir = ".";
    std::optional<std::uint64_t> gen_seed;
    auto* gen = app.add_subcommand("generate", "Write a synthetic source/target CSV pair");
    auto* preset_opt = gen->add_option("--preset", preset, "ambiguity-16 or null-16");
    gen->add_option("--spec", spec_path, "Benchmark spec JSON")->excludes(preset_opt);
    gen->add_option("--seed", gen_seed, "Override the spec seed");
    gen->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

    // train-source
    TrainFlags ts;
    std::string ts_source, ts_eval;
    Outputs ts_out;
    auto* train = app.add_subcommand("train-source", "Train on labeled source data only");
    train->add_option("--source", ts_source, "Labeled source CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--eval", ts_eval, "Labeled CSV scored after every epoch")->check(CLI::ExistingFile);
    train->add_option("--report", ts_out.report, "Report JSON path");
    train->add_option("--checkpoint", ts_out.checkpoint, "Checkpoint output path");
    add_training_flags(train, ts, false);

    // adapt
    TrainFlags ad;
    std::string ad_source, ad_target, ad_init;
    Outputs ad_out;
    auto* adp = app.add_subcommand("adapt", "Adapt a model to an unlabeled target domain");
    adp->add_option("--source", ad_source, "Labeled source CSV")->required()->check(CLI::ExistingFile);
    adp->add_option("--target", ad_target, "Target CSV (labels used for evaluation only)")
        ->required()
        ->check(CLI::ExistingFile);
    adp->add_option("--init", ad_init, "Start from this checkpoint")->check(CLI::ExistingFile);
    adp->add_flag("--pretrained", ad.cfg.pretrained, "Two-stage: the --init model is already source-trained");
    adp->add_option("--report", ad_out.report, "Report JSON path");
    adp->add_option("--checkpoint", ad_out.checkpoint, "Checkpoint output path");
    add_training_flags(adp, ad, true);

    // chain
    TrainFlags ch;
    std::string ch_source, ch_init, ch_dir;
    std::vector<std::string> ch_targets;
    Outputs ch_out;
    auto* chain = app.add_subcommand("chain", "Adapt through intermediate target domains in order");
    chain->add_option("--source", ch_source, "Labeled source CSV")->required()->check(CLI::ExistingFile);
    chain->add_option("--target", ch_targets, "Target CSVs, in adaptation order")
        ->required()
        ->check(CLI::ExistingFile);
    chain->add_option("--init", ch_init, "Start from this checkpoint")->check(CLI::ExistingFile);
    chain->add_option("--checkpoint-dir", ch_dir, "Directory for per-stage checkpoints");
    chain->add_option("--report", ch_out.report, "Report JSON path");
    add_training_flags(chain, ch, true);

    // evaluate
    std::string ev_ckpt, ev_data;
    Outputs ev_out;
    auto* eval = app.add_subcommand("evaluate", "Score a checkpoint on a labeled CSV");
    eval->add_option("--checkpoint", ev_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", ev_data, "Labeled CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--report", ev_out.report, "Report JSON path");

    // grid
    TrainFlags gr;
    std::string gr_source, gr_target;
    std::vector<std::uint64_t> gr_seeds;
    Outputs gr_out;
    auto* grid = app.add_subcommand("grid", "Run the selection-policy ablation grid");
    grid->add_option("--source", gr_source, "Labeled source CSV")->required()->check(CLI::ExistingFile);
    grid->add_option("--target", gr_target, "Labeled target CSV")->required()->check(CLI::ExistingFile);
    grid->add_option("--seeds", gr_seeds, "Seeds shared by every cell")->delimiter(',')->required();
    grid->add_option("--report", gr_out.report, "Report JSON path");
    add_training_flags(grid, gr, true);
    grid->remove_option(grid->get_option("--seed"));
    grid->remove_option(grid->get_option("--policy"));
    grid->remove_option(grid->get_option("--k"));
    grid->remove_option(grid->get_option("--threshold"));

    // gradcheck
    GradcheckOptions gc;
    std::string gc_report;
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of all analytic gradients");
    grad->add_option("--instances", gc.instances, "Random instances per suite")->capture_default_str();
    grad->add_option("--seed", gc.seed, "Instance seed")->capture_default_str();
    grad->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();
    grad->add_option("--report", gc_report, "Report JSON path");

    // dump-features
    std::string df_ckpt, df_data, df_out;
    auto* dump = app.add_subcommand("dump-features", "Write g(x) features of a CSV to a new CSV");
    dump->add_option("--checkpoint", df_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
    dump->add_option("--data", df_data, "Input CSV")->required()->check(CLI::ExistingFile);
    dump->add_option("--out", df_out, "Output CSV")->required();

    std::vector<std::string> argv_store{"mcrl"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            if (preset.empty() == spec_path.empty()) throw UsageError("generate: give exactly one of --preset, --spec");
            ShiftSpec spec = preset.empty() ? shift_spec_from_json(read_file(spec_path)) : preset_by_name(preset);
            if (gen_seed) spec.seed = *gen_seed;
            const Benchmark b = generate_shift_benchmark(spec);
            std::filesystem::create_directories(out_dir);
            const std::filesystem::path dir(out_dir);
            save_csv(b.source, dir / "source.csv");
            save_csv(b.target.with_visible_labels(), dir / "target.csv");
            write_file((dir / "spec.json").string(), shift_spec_to_json(spec));
            out << "wrote " << (dir / "source.csv").string() << " (" << b.source.size() << " rows), "
                << (dir / "target.csv").string() << " (" << b.target.size() << " rows)\n";
            return 0;
        }

        if (train->parsed()) {
            const AdaptConfig cfg = resolve_config(ts);
            const EmbeddingDataset source = load_source(ts_source);
            std::optional<EmbeddingDataset> ev;
            if (!ts_eval.empty())
                ev = load_csv(ts_eval, CsvSchema{source.dim(), CsvSchema::Labels::required, source.classes()});
            const ModelParams start = starting_model("", source, ts);
            const TrainResult r = train_source_only(start, source, cfg, ev ? &*ev : nullptr);
            if (!ts_out.checkpoint.empty())
                save_checkpoint(Checkpoint{r.model, cfg.seed, cfg.epochs, kCheckpointVersion}, ts_out.checkpoint);
            const RunContext ctx{"train-source", ts_source, ts_eval, r.model.dims(), ts.timing};
            emit(out, ts_out, training_report_json(r.report, ctx), training_table(r.report));
            return 0;
        }

        if (adp->parsed()) {
            const AdaptConfig cfg = resolve_config(ad);
            if (cfg.pretrained && ad_init.empty()) throw UsageError("adapt: --pretrained needs --init");
            const EmbeddingDataset source = load_source(ad_source);
            const EmbeddingDataset target = load_target(ad_target, source);
            const ModelParams start = starting_model(ad_init, source, ad);
            const EmbeddingDataset* ev = target.has_evaluation_labels() ? &target : nullptr;
            const TrainResult r = adapt(start, source, target, cfg, ev);
            if (!ad_out.checkpoint.empty())
                save_checkpoint(Checkpoint{r.model, cfg.seed, cfg.epochs, kCheckpointVersion}, ad_out.checkpoint);
            const RunContext ctx{"adapt", ad_source, ad_target, r.model.dims(), ad.timing};
            emit(out, ad_out, training_report_json(r.report, ctx), training_table(r.report));
            return 0;
        }

        if (chain->parsed()) {
            const AdaptConfig cfg = resolve_config(ch);
            const EmbeddingDataset source = load_source(ch_source);
            std::vector<EmbeddingDataset> targets;
            std::string names;
            for (const auto& t : ch_targets) {
                targets.push_back(load_target(t, source));
                names += (names.empty() ? "" : ",") + t;
            }
            const ChainResult r = chain_adapt(starting_model(ch_init, source, ch), source, targets, cfg, ch_dir);
            const RunContext ctx{"chain", ch_source, names, r.model.dims(), ch.timing};
            std::string table;
            for (std::size_t i = 0; i < r.reports.size(); ++i)
                table += "stage " + std::to_string(i) + " (" + ch_targets[i] + ")\n" + training_table(r.reports[i]);
            emit(out, ch_out, chain_report_json(r.reports, ctx), table);
            return 0;
        }

        if (eval->parsed()) {
            const Checkpoint ck = load_checkpoint(ev_ckpt);
            const auto dims = ck.params.dims();
            const EmbeddingDataset data =
                load_csv(ev_data, CsvSchema{dims.d_in, CsvSchema::Labels::required, dims.classes});
            bind_checkpoint(ck, data.dim(), data.classes());
            const MetricsReport m = evaluate_model(ck.params, data);
            const RunContext ctx{"evaluate", ev_ckpt, ev_data, dims, false};
            emit(out, ev_out, metrics_report_json(m, ctx), metrics_table(m));
            return 0;
        }

        if (grid->parsed()) {
            gr.seed = 0;
            const AdaptConfig cfg = resolve_config(gr);
            const EmbeddingDataset source = load_source(gr_source);
            const EmbeddingDataset target = load_target(gr_target, source);
            const ModelDims dims{source.dim(), gr.hidden, gr.feat, source.classes()};
            const AblationGrid g = run_ablation_grid(source, target, cfg, dims, gr_seeds);
            const RunContext ctx{"grid", gr_source, gr_target, dims, false};
            emit(out, gr_out, grid_report_json(g, ctx), grid_table(g));
            return 0;
        }

        if (grad->parsed()) {
            const GradcheckReport r = run_gradcheck(gc);
            out << gradcheck_table(r);
            if (!gc_report.empty()) write_file(gc_report, gradcheck_report_json(r));
            return r.passed() ? 0 : 1;
        }

        if (dump->parsed()) {
            const Checkpoint ck = load_checkpoint(df_ckpt);
            const auto dims = ck.params.dims();
            const EmbeddingDataset data = load_csv(df_data, CsvSchema{dims.d_in, CsvSchema::Labels::optional, dims.classes});
            bind_checkpoint(ck, data.dim(), data.classes());
            std::optional<std::vector<int>> labels;
            if (data.has_evaluation_labels()) {
                const auto l = data.evaluation_labels();
                labels.emplace(l.begin(), l.end());
            }
            save_csv(EmbeddingDataset(forward_features(ck.params, data.features()), labels, data.classes(), df_data),
                     df_out);
            out << "wrote " << df_out << " (" << data.size() << " x " << dims.d_feat << ")\n";
            return 0;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace mcrl
