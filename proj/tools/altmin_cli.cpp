// Experiment runner: train / gridsearch / theory / gradcheck subcommands over
// flat key = value configs. Every output CSV embeds the fully resolved config
// as leading comment lines so a run can be reproduced from its artifact alone.
//
// Exit codes: 0 success, 1 config or input-format error, 2 failed checks or
// runtime errors.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "altmin/altmin.hpp"
#include "altmin/baselines.hpp"
#include "altmin/common.hpp"
#include "altmin/config.hpp"
#include "altmin/datasets.hpp"
#include "altmin/gradcheck.hpp"
#include "altmin/metrics.hpp"
#include "altmin/network.hpp"
#include "altmin/presets.hpp"
#include "altmin/rnn.hpp"
#include "altmin/theory.hpp"

namespace fs = std::filesystem;
using namespace altmin;

namespace {

const std::vector<std::string>& train_keys() {
    static const std::vector<std::string> keys = {
        "preset",        "dataset",          "n_samples",
        "features",      "classes",          "separation",
        "csv_path",      "csv_standardize",  "idx_images",
        "idx_labels",    "train_fraction",   "eval_split",
        "model",         "hidden_units",     "hidden_activation",
        "hidden_activations",                "rnn_d",
        "rnn_pool",      "algo",             "lr",
        "sgd_decay",     "code_lr",          "code_iters",
        "weight_iters",  "mu0",              "mu_increment",
        "mu_multiplier", "mu_max",           "batch",
        "epochs",        "seed"};
    return keys;
}

// Scalar hyperparameters that may carry a value list in a gridsearch config.
const std::vector<std::string>& grid_keys() {
    static const std::vector<std::string> keys = {
        "lr",   "sgd_decay", "code_lr",       "code_iters", "weight_iters", "mu0",
        "mu_increment",      "mu_multiplier", "mu_max",     "batch",        "epochs"};
    return keys;
}

// Runs body(0..n-1) on a small worker pool; results land by index, so the
// output is order-independent of scheduling.
template <typename F>
void run_tasks(size_t n, F&& body) {
    size_t workers = std::min<size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::future<void>> futs;
    futs.reserve(workers);
    for (size_t w = 0; w < workers; ++w)
        futs.push_back(std::async(std::launch::async, [&]() {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        }));
    for (auto& f : futs) f.get();
}

struct LoadedData {
    Dataset train;
    Dataset eval;
    size_t img_rows = 0, img_cols = 0;  // nonzero when rows are rasters
};

LoadedData load_data(const Config& cfg) {
    uint64_t seed = cfg.get_u64("seed", 0);
    std::string source = cfg.get_string("dataset");
    Dataset ds;
    LoadedData out;
    if (source == "digits") {
        size_t n = static_cast<size_t>(cfg.get_int("n_samples", 12000));
        ds = make_digits(n, seed);
        out.img_rows = out.img_cols = 28;
    } else if (source == "blobs") {
        size_t n = static_cast<size_t>(cfg.get_int("n_samples", 2000));
        size_t p = static_cast<size_t>(cfg.get_int("features", 20));
        int m = static_cast<int>(cfg.get_int("classes", 3));
        double sep = cfg.get_double("separation", 2.0);
        ds = make_blobs(n, p, m, sep, seed);
    } else if (source == "csv") {
        ds = read_csv_labeled(cfg.get_string("csv_path"), cfg.get_bool("csv_standardize", true));
    } else if (source == "idx") {
        IdxImages img = read_idx_images_full(cfg.get_string("idx_images"));
        ds.features = std::move(img.data);
        ds.labels = read_idx_labels(cfg.get_string("idx_labels"));
        int max_label = 0;
        for (int l : ds.labels) max_label = std::max(max_label, l);
        ds.num_classes = max_label + 1;
        out.img_rows = img.rows;
        out.img_cols = img.cols;
    } else {
        throw ConfigError("unknown dataset '" + source + "' (digits|blobs|csv|idx)");
    }
    ds.validate();
    SplitSpec sp;
    sp.train_fraction = cfg.get_double("train_fraction", 5.0 / 6.0);
    sp.seed = seed;
    auto [train, eval] = split(ds, sp);
    if (eval.size() == 0)
        throw ConfigError("train_fraction leaves no evaluation rows");
    out.train = std::move(train);
    out.eval = std::move(eval);
    return out;
}

// Trains per the scalar config and returns the metrics rows; writes a weight
// checkpoint when a path is given.
std::vector<MetricsRow> run_training(const Config& cfg, const fs::path& checkpoint) {
    uint64_t seed = cfg.get_u64("seed", 0);
    std::string model = cfg.get_string("model", "mlp");
    std::string algo = cfg.get_string("algo");
    std::string eval_split = cfg.get_string("eval_split", "val");
    int epochs = static_cast<int>(cfg.get_int("epochs", 1));
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    size_t batch = static_cast<size_t>(cfg.get_int("batch", 200));
    LoadedData data = load_data(cfg);

    bool is_am = algo == "am-adam" || algo == "am-mem";
    bool is_baseline = algo == "adam" || algo == "sgd";
    if (!is_am && !is_baseline)
        throw ConfigError("unknown algo '" + algo + "' (sgd|adam|am-adam|am-mem)");

    AmConfig am;
    BaselineConfig base;
    if (is_am) {
        am.variant = algo == "am-mem" ? AmVariant::AmMem : AmVariant::AmAdam;
        am.weight_lr = cfg.get_double("lr", 0.001);
        am.code_lr = cfg.get_double("code_lr", 0.5);
        am.code_iters = static_cast<int>(cfg.get_int("code_iters", 1));
        am.weight_iters = static_cast<int>(cfg.get_int("weight_iters", 1));
        am.mu.mu0 = cfg.get_double("mu0", 0.01);
        am.mu.batch_increment = cfg.get_double("mu_increment", 0.0);
        am.mu.epoch_multiplier = cfg.get_double("mu_multiplier", 1.0);
        am.mu.mu_max = cfg.get_double("mu_max", 1.5);
        am.validate();
    } else {
        base.algo = algo == "adam" ? BaselineAlgo::Adam : BaselineAlgo::Sgd;
        base.lr = cfg.get_double("lr", algo == "adam" ? 0.001 : 0.01);
        base.sgd_epoch_decay = cfg.get_double("sgd_decay", 0.9);
        base.validate();
    }

    if (model == "mlp") {
        std::vector<size_t> sizes{data.train.features.cols()};
        std::vector<long> hidden =
            cfg.has("hidden_units") ? cfg.get_int_list("hidden_units") : std::vector<long>{100, 100};
        for (long h : hidden) {
            if (h < 1) throw ConfigError("hidden_units entries must be >= 1");
            sizes.push_back(static_cast<size_t>(h));
        }
        sizes.push_back(static_cast<size_t>(data.train.num_classes));
        std::vector<Activation> acts;
        if (cfg.has("hidden_activations")) {
            for (const auto& name : cfg.get_list("hidden_activations"))
                acts.push_back(activation_from_name(name));
        } else {
            acts.assign(hidden.size(),
                        activation_from_name(cfg.get_string("hidden_activation", "relu")));
        }
        if (acts.size() != hidden.size())
            throw ConfigError("hidden_activations lists " + std::to_string(acts.size()) +
                              " entries for " + std::to_string(hidden.size()) + " hidden layers");
        if (is_baseline)
            for (Activation a : acts)
                if (a == Activation::Sign)
                    throw ConfigError("sign activations need an alternating-minimization algo");
        NetworkSpec spec{std::move(sizes), std::move(acts), seed};
        NetworkState net = init_network(spec);
        std::vector<MetricsRow> rows =
            is_am ? fit(net, data.train, data.eval, am, epochs, batch, seed, algo, eval_split)
                  : baseline_fit(net, data.train, data.eval, base, epochs, batch, seed, algo,
                                 eval_split);
        if (!checkpoint.empty()) save_checkpoint(net, checkpoint);
        return rows;
    }
    if (model == "rnn") {
        if (algo == "am-mem") throw ConfigError("am-mem does not apply to the rnn model");
        if (data.img_rows == 0)
            throw ConfigError("model rnn needs a raster dataset (digits or idx)");
        size_t d = static_cast<size_t>(cfg.get_int("rnn_d", 15));
        size_t pool = static_cast<size_t>(cfg.get_int("rnn_pool", 1));
        Sequences tr = pool_sequence(data.train.features, data.img_rows, data.img_cols, pool);
        Sequences ev = pool_sequence(data.eval.features, data.img_rows, data.img_cols, pool);
        SeqDataset strain = make_seq_dataset(tr, data.train.labels, data.train.num_classes);
        SeqDataset seval = make_seq_dataset(ev, data.eval.labels, data.eval.num_classes);
        ElmanState st =
            init_elman(d, tr.T, tr.p, static_cast<size_t>(data.train.num_classes), seed);
        std::vector<MetricsRow> rows =
            is_am ? rnn_fit(st, strain, seval, am, epochs, batch, seed, algo, eval_split)
                  : bptt_fit(st, strain, seval, base, epochs, batch, seed, algo, eval_split);
        if (!checkpoint.empty()) save_rnn_checkpoint(st, checkpoint);
        return rows;
    }
    throw ConfigError("unknown model '" + model + "' (mlp|rnn)");
}

// Last evaluation row of a run (initial row when epochs = 0).
const MetricsRow& final_eval_row(const std::vector<MetricsRow>& rows) {
    for (size_t i = rows.size(); i-- > 0;)
        if (rows[i].split != "train") return rows[i];
    return rows.back();
}

int cmd_train(const Config& raw, const fs::path& out) {
    Config cfg = apply_preset(raw);
    cfg.require_known_keys(train_keys());
    std::vector<MetricsRow> rows = run_training(cfg, out / "checkpoint.bin");
    write_metrics_csv(out / "metrics.csv", rows, cfg.canonical_lines());
    const MetricsRow& last = final_eval_row(rows);
    std::cout << "final " << last.split << " accuracy " << format_double(last.accuracy)
              << ", loss " << format_double(last.loss) << "\n"
              << "wrote " << (out / "metrics.csv").string() << " and "
              << (out / "checkpoint.bin").string() << "\n";
    return 0;
}

int cmd_gridsearch(const Config& raw, const fs::path& out) {
    Config cfg = apply_preset(raw);
    std::vector<std::string> allowed = train_keys();
    allowed.push_back("seeds");
    cfg.require_known_keys(allowed);

    std::vector<std::string> axes;
    for (const auto& key : grid_keys())
        if (cfg.is_list(key)) axes.push_back(key);
    std::sort(axes.begin(), axes.end());
    if (axes.empty())
        throw ConfigError("gridsearch needs at least one list-valued hyperparameter");
    std::vector<std::vector<std::string>> values;
    size_t n_points = 1;
    for (const auto& a : axes) {
        values.push_back(cfg.get_list(a));
        if (values.back().empty()) throw ConfigError("grid for '" + a + "' is empty");
        n_points *= values.back().size();
    }
    std::vector<long> seeds = cfg.has("seeds") ? cfg.get_int_list("seeds")
                                               : std::vector<long>{cfg.get_int("seed", 0)};
    if (seeds.empty()) throw ConfigError("gridsearch needs at least one seed");
    for (long s : seeds)
        if (s < 0) throw ConfigError("seeds must be >= 0");

    // Materialize one scalar config per grid point; each run then matches a
    // cmd_train invocation of that config exactly.
    std::vector<Config> points(n_points, cfg);
    std::vector<std::string> labels(n_points);
    for (size_t pi = 0; pi < n_points; ++pi) {
        Config& pt = points[pi];
        pt.erase("seeds");
        size_t rem = pi;
        std::string label;
        for (size_t ai = axes.size(); ai-- > 0;) {
            const auto& vals = values[ai];
            pt.set(axes[ai], vals[rem % vals.size()]);
            rem /= vals.size();
        }
        for (size_t ai = 0; ai < axes.size(); ++ai) {
            if (ai) label += " ";
            label += axes[ai] + "=" + pt.get_string(axes[ai]);
        }
        labels[pi] = label;
    }

    struct RunResult {
        double loss = 0.0, acc = 0.0;
    };
    std::vector<RunResult> results(n_points * seeds.size());
    run_tasks(results.size(), [&](size_t i) {
        size_t pi = i / seeds.size();
        Config pt = points[pi];
        pt.set("seed", std::to_string(seeds[i % seeds.size()]));
        const MetricsRow& last = final_eval_row(run_training(pt, fs::path()));
        results[i] = {last.loss, last.accuracy};
    });

    struct Ranked {
        size_t point;
        double mean_acc, mean_loss;
    };
    std::vector<Ranked> ranking;
    for (size_t pi = 0; pi < n_points; ++pi) {
        double acc = 0.0, loss = 0.0;
        for (size_t si = 0; si < seeds.size(); ++si) {
            const RunResult& r = results[pi * seeds.size() + si];
            acc += r.acc;
            loss += std::isfinite(r.loss) ? r.loss : std::numeric_limits<double>::max();
        }
        ranking.push_back({pi, acc / static_cast<double>(seeds.size()),
                           loss / static_cast<double>(seeds.size())});
    }
    std::stable_sort(ranking.begin(), ranking.end(), [&](const Ranked& a, const Ranked& b) {
        if (a.mean_acc != b.mean_acc) return a.mean_acc > b.mean_acc;
        if (a.mean_loss != b.mean_loss) return a.mean_loss < b.mean_loss;
        return labels[a.point] < labels[b.point];
    });

    fs::path path = out / "gridsearch.csv";
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    for (const auto& line : cfg.canonical_lines()) os << "# " << line << "\n";
    for (size_t r = 0; r < ranking.size(); ++r)
        os << "# rank " << r + 1 << ": point " << ranking[r].point << " " << labels[ranking[r].point]
           << " mean_val_accuracy=" << format_double(ranking[r].mean_acc)
           << " mean_val_loss=" << format_double(ranking[r].mean_loss) << "\n";
    os << "point,seed";
    for (const auto& a : axes) os << "," << a;
    os << ",final_val_loss,final_val_accuracy\n";
    for (size_t pi = 0; pi < n_points; ++pi)
        for (size_t si = 0; si < seeds.size(); ++si) {
            const RunResult& r = results[pi * seeds.size() + si];
            os << pi << "," << seeds[si];
            for (size_t ai = 0; ai < axes.size(); ++ai) os << "," << points[pi].get_string(axes[ai]);
            os << "," << format_double(r.loss) << "," << format_double(r.acc) << "\n";
        }
    if (!os) throw FormatError("write failed: " + path.string());
    std::cout << "best: point " << ranking.front().point << " " << labels[ranking.front().point]
              << " mean_val_accuracy " << format_double(ranking.front().mean_acc) << "\n"
              << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_theory(const Config& cfg, const fs::path& out) {
    cfg.require_known_keys({"blocks", "dims", "lambda", "coupling", "noise", "traces", "steps",
                            "seed", "sigma_samples"});
    size_t K = static_cast<size_t>(cfg.get_int("blocks", 2));
    std::vector<size_t> dims;
    if (cfg.has("dims")) {
        for (long v : cfg.get_int_list("dims")) {
            if (v < 1) throw ConfigError("dims entries must be >= 1");
            dims.push_back(static_cast<size_t>(v));
        }
        if (dims.size() == 1 && K > 1) dims.assign(K, dims[0]);
    } else {
        dims.assign(K, 3);
    }
    if (dims.size() != K)
        throw ConfigError("dims lists " + std::to_string(dims.size()) + " entries for " +
                          std::to_string(K) + " blocks");
    double lambda = cfg.get_double("lambda", 1.0);
    double coupling = cfg.get_double("coupling", 0.1);
    double noise = cfg.get_double("noise", 0.5);
    size_t n_traces = static_cast<size_t>(cfg.get_int("traces", 200));
    size_t steps = static_cast<size_t>(cfg.get_int("steps", 2000));
    uint64_t seed = cfg.get_u64("seed", 7);
    size_t sigma_samples = static_cast<size_t>(cfg.get_int("sigma_samples", 1000));
    if (n_traces < 1 || steps < 1) throw ConfigError("traces and steps must be >= 1");

    TheoryProblem p = make_quadratic_problem(K, dims, lambda, coupling, seed);
    p.noise_sigma = noise;
    double sigma_sq = estimate_sigma_sq(p, sigma_samples, substream(seed, 0x516));
    std::vector<AmTrace> traces(n_traces);
    run_tasks(n_traces, [&](size_t i) {
        traces[i] = stochastic_am_run(p, steps, substream(seed, 0x7ace0 + i));
    });
    BoundReport rec = check_recursion(traces, p, sigma_sq);
    RateReport rate = check_final_rate(traces, p, sigma_sq);

    fs::path path = out / "theory.csv";
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    for (const auto& line : cfg.canonical_lines()) os << "# " << line << "\n";
    os << "# sigma_sq = " << format_double(sigma_sq) << "\n"
       << "# xi = " << format_double(p.xi()) << "\n"
       << "# step_a = " << format_double(p.step_a()) << "\n"
       << "# slope = " << format_double(rate.slope)
       << (rate.slope_applicable ? "" : " (not applicable, noiseless)") << "\n";
    os << "t,mean_error,recursion_rhs,final_rhs,pass\n";
    for (size_t i = 0; i < rec.rows.size(); ++i) {
        bool pass = rec.rows[i].pass && rate.rows[i].pass;
        os << rec.rows[i].t << "," << format_double(rec.rows[i].mean_err) << ","
           << format_double(rec.rows[i].rhs) << "," << format_double(rate.rows[i].rhs) << ","
           << (pass ? 1 : 0) << "\n";
    }
    if (!os) throw FormatError("write failed: " + path.string());

    std::cout << "recursion violations " << rec.violations.size() << "/" << rec.rows.size()
              << ", rate violations " << rate.violations.size() << "/" << rate.rows.size()
              << ", slope " << format_double(rate.slope)
              << (rate.slope_applicable ? "" : " (noiseless, not checked)") << "\n"
              << "wrote " << path.string() << "\n";
    if (!rec.all_pass || !rate.all_pass || !rate.slope_ok) {
        std::cerr << "theory check failed:"
                  << (!rec.all_pass ? " recursion bound violated" : "")
                  << (!rate.all_pass ? " final rate bound violated" : "")
                  << (!rate.slope_ok ? " decay slope outside [-1.3, -0.7]" : "") << "\n";
        return 2;
    }
    return 0;
}

int cmd_gradcheck(const Config& cfg, const std::string& fault_name) {
    cfg.require_known_keys({"seed", "instances"});
    GradcheckOptions opts;
    opts.seed = cfg.get_u64("seed", 99);
    opts.instances = static_cast<int>(cfg.get_int("instances", 10));
    if (opts.instances < 1) throw ConfigError("instances must be >= 1");
    if (fault_name == "activation-grad") {
        opts.fault = Fault::ActivationGrad;
    } else if (!fault_name.empty() && fault_name != "none") {
        throw ConfigError("unknown fault '" + fault_name + "'");
    }
    std::vector<CheckResult> results = run_gradcheck(opts);
    bool all_pass = true;
    for (const auto& r : results) {
        char err[32];
        std::snprintf(err, sizeof(err), "%.3g", r.max_err);
        std::cout << (r.pass ? "PASS" : "FAIL") << " " << r.name << ": max err " << err << " ("
                  << r.instances << " instances)"
                  << (r.detail.empty() ? "" : "; " + r.detail) << "\n";
        all_pass = all_pass && r.pass;
    }
    if (!all_pass) {
        std::cerr << "gradcheck failed\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"alternating-minimization experiment runner"};
    app.require_subcommand(1);
    std::string config_path, out_dir = ".", fault_name;
    uint64_t seed_override = 0;
    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", config_path, "flat key = value config file");
        if (config_required) c->required();
        sub->add_option("--seed", seed_override, "override the config seed");
        sub->add_option("--out", out_dir, "output directory");
    };
    CLI::App* train = app.add_subcommand("train", "train one model and write metrics + checkpoint");
    CLI::App* grid = app.add_subcommand("gridsearch", "train the cartesian hyperparameter grid");
    CLI::App* theory = app.add_subcommand("theory", "verify the convergence bounds empirically");
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "run all gradient and solver oracles");
    add_common(train, true);
    add_common(grid, true);
    add_common(theory, false);
    add_common(gradcheck, false);
    gradcheck->add_option("--inject-fault", fault_name, "corrupt a named check (test hook)")
        ->group("");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        Config cfg = config_path.empty() ? Config() : Config::parse_file(config_path);
        CLI::App* active = train->parsed() ? train
                           : grid->parsed() ? grid
                           : theory->parsed() ? theory
                                              : gradcheck;
        if (active->count("--seed")) cfg.set("seed", std::to_string(seed_override));
        fs::path out(out_dir);
        fs::create_directories(out);
        if (train->parsed()) return cmd_train(cfg, out);
        if (grid->parsed()) return cmd_gridsearch(cfg, out);
        if (theory->parsed()) return cmd_theory(cfg, out);
        return cmd_gradcheck(cfg, fault_name);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
