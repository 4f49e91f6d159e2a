// milpool: bag-level weakly supervised image classification with
// permutation-invariant score pooling.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "mil/checkpoint.hpp"
#include "mil/errors.hpp"
#include "mil/gradcheck.hpp"
#include "mil/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    // pooling
    std::string pool = "nor";
    double r = 10.0;
    double epsilon = 1e-7;
    // optimizer
    std::string optimizer = "adam";
    double learning_rate = 1e-4;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double weight_decay = 5e-4;
    int max_epochs = 100;
    int patience = 10;
    int batch_bags = 1;
    std::uint64_t seed = 42;
    // augmentation
    std::string augment = "on";
    double stain_sigma = 0.1;
    double blur_radius_max = 2.0;
    std::string stain_h = "0.65,0.70,0.29";
    std::string stain_e = "0.07,0.99,0.11";
    // data / evaluation
    double val_fraction = 0.1;
    int white_threshold = 240;
    double threshold = 0.5;
    // synthetic generator
    int bags = 400;
    int k_min = 5;
    int k_max = 15;
    double witness_rate = 0.1;
    int patch_size = 32;
};

std::array<double, 3> parse_vec3(const std::string& s, const std::string& what) {
    std::array<double, 3> v{};
    std::stringstream ss(s);
    std::string tok;
    int i = 0;
    while (std::getline(ss, tok, ',')) {
        if (i >= 3) throw mil::ConfigError(what + ": expected 3 comma-separated values");
        try {
            v[static_cast<std::size_t>(i++)] = std::stod(tok);
        } catch (const std::exception&) {
            throw mil::ConfigError(what + ": bad number '" + tok + "'");
        }
    }
    if (i != 3) throw mil::ConfigError(what + ": expected 3 comma-separated values");
    return v;
}

bool parse_on_off(const std::string& s, const std::string& what) {
    if (s == "on") return true;
    if (s == "off") return false;
    throw mil::ConfigError(what + " must be 'on' or 'off', got '" + s + "'");
}

// Flat key=value config file; '#' starts a comment, unknown keys are an
// error so typos never pass silently. Command-line flags override.
void apply_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw mil::ConfigError("cannot open config file " + path);

    const std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"pool", [&](const std::string& v) { cfg.pool = v; }},
        {"r", [&](const std::string& v) { cfg.r = std::stod(v); }},
        {"epsilon", [&](const std::string& v) { cfg.epsilon = std::stod(v); }},
        {"optimizer", [&](const std::string& v) { cfg.optimizer = v; }},
        {"learning_rate", [&](const std::string& v) { cfg.learning_rate = std::stod(v); }},
        {"momentum", [&](const std::string& v) { cfg.momentum = std::stod(v); }},
        {"beta1", [&](const std::string& v) { cfg.beta1 = std::stod(v); }},
        {"beta2", [&](const std::string& v) { cfg.beta2 = std::stod(v); }},
        {"adam_epsilon", [&](const std::string& v) { cfg.adam_epsilon = std::stod(v); }},
        {"weight_decay", [&](const std::string& v) { cfg.weight_decay = std::stod(v); }},
        {"max_epochs", [&](const std::string& v) { cfg.max_epochs = std::stoi(v); }},
        {"patience", [&](const std::string& v) { cfg.patience = std::stoi(v); }},
        {"batch_bags", [&](const std::string& v) { cfg.batch_bags = std::stoi(v); }},
        {"seed", [&](const std::string& v) { cfg.seed = std::stoull(v); }},
        {"augment", [&](const std::string& v) { cfg.augment = v; }},
        {"stain_sigma", [&](const std::string& v) { cfg.stain_sigma = std::stod(v); }},
        {"blur_radius_max", [&](const std::string& v) { cfg.blur_radius_max = std::stod(v); }},
        {"stain_h", [&](const std::string& v) { cfg.stain_h = v; }},
        {"stain_e", [&](const std::string& v) { cfg.stain_e = v; }},
        {"val_fraction", [&](const std::string& v) { cfg.val_fraction = std::stod(v); }},
        {"white_threshold", [&](const std::string& v) { cfg.white_threshold = std::stoi(v); }},
        {"threshold", [&](const std::string& v) { cfg.threshold = std::stod(v); }},
        {"bags", [&](const std::string& v) { cfg.bags = std::stoi(v); }},
        {"k_min", [&](const std::string& v) { cfg.k_min = std::stoi(v); }},
        {"k_max", [&](const std::string& v) { cfg.k_max = std::stoi(v); }},
        {"witness_rate", [&](const std::string& v) { cfg.witness_rate = std::stod(v); }},
        {"patch_size", [&](const std::string& v) { cfg.patch_size = std::stoi(v); }},
    };

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        const std::string stripped = strip(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw mil::ConfigError(path + ":" + std::to_string(lineno) +
                                   ": expected key=value");
        }
        const std::string key = strip(stripped.substr(0, eq));
        const std::string value = strip(stripped.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw mil::ConfigError(path + ":" + std::to_string(lineno) +
                                   ": unknown key '" + key + "'");
        }
        try {
            it->second(value);
        } catch (const mil::ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw mil::ConfigError(path + ":" + std::to_string(lineno) +
                                   ": bad value '" + value + "' for " + key);
        }
    }
}

mil::PoolingConfig pooling_from(const RunConfig& cfg) {
    mil::PoolingConfig p;
    p.kind = mil::pool_kind_from_string(cfg.pool);
    p.r = cfg.r;
    p.epsilon = cfg.epsilon;
    p.validate();
    return p;
}

mil::AugmentConfig augment_from(const RunConfig& cfg) {
    mil::AugmentConfig a;
    a.stain_sigma = cfg.stain_sigma;
    a.blur_radius_max = cfg.blur_radius_max;
    a.stain = mil::StainMatrix::from_rows(parse_vec3(cfg.stain_h, "stain_h"),
                                          parse_vec3(cfg.stain_e, "stain_e"));
    a.validate();
    return a;
}

mil::TrainConfig train_from(const RunConfig& cfg) {
    mil::TrainConfig t;
    t.optimizer = mil::optimizer_from_string(cfg.optimizer);
    t.learning_rate = cfg.learning_rate;
    t.momentum = cfg.momentum;
    t.beta1 = cfg.beta1;
    t.beta2 = cfg.beta2;
    t.adam_epsilon = cfg.adam_epsilon;
    t.weight_decay = cfg.weight_decay;
    t.max_epochs = cfg.max_epochs;
    t.patience = cfg.patience;
    t.batch_bags = cfg.batch_bags;
    t.seed = cfg.seed;
    t.nll_epsilon = cfg.epsilon;
    t.augment_enabled = parse_on_off(cfg.augment, "augment");
    t.pooling = pooling_from(cfg);
    t.augment = augment_from(cfg);
    t.validate();
    return t;
}

// Consistent patch side across a bag list; the default architecture is
// picked from it.
int patch_side_of(const std::vector<mil::Bag>& bags) {
    if (bags.empty() || bags.front().patches.empty()) {
        throw mil::ConfigError("no usable bags in dataset");
    }
    const int side = bags.front().patches.front().side;
    for (const auto& bag : bags) {
        for (const auto& p : bag.patches) {
            if (p.side != side) {
                throw mil::ConfigError("mixed patch sizes in dataset (" +
                                       std::to_string(side) + " vs " +
                                       std::to_string(p.side) + ")");
            }
        }
    }
    return side;
}

json report_to_json(const mil::MetricsReport& r) {
    json j;
    j["accuracy"] = r.accuracy;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f_score"] = r.f_score;
    j["auc"] = r.auc_defined ? json(r.auc) : json(nullptr);
    j["tp"] = r.tp;
    j["fp"] = r.fp;
    j["tn"] = r.tn;
    j["fn"] = r.fn;
    j["threshold"] = r.threshold;
    return j;
}

std::string metrics_table(const std::vector<mil::MetricsReport>& folds,
                          const mil::MetricsReport& mean) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-8s %9s %10s %8s %8s %6s\n", "Fold",
                  "Accuracy", "Precision", "Recall", "F-score", "AUC");
    os << buf;
    auto row = [&](const std::string& name, const mil::MetricsReport& r) {
        std::snprintf(buf, sizeof buf, "%-8s %9.3f %10.3f %8.3f %8.3f %6.3f\n",
                      name.c_str(), r.accuracy, r.precision, r.recall, r.f_score,
                      r.auc);
        os << buf;
    };
    for (std::size_t i = 0; i < folds.size(); ++i) {
        row(std::to_string(i + 1), folds[i]);
    }
    row("mean", mean);
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw mil::IngestError("cannot write " + path);
    out << content;
}

// ----- subcommands ---------------------------------------------------

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
    mil::SynthConfig sc;
    sc.num_bags = cfg.bags;
    sc.k_min = cfg.k_min;
    sc.k_max = cfg.k_max;
    sc.witness_rate = cfg.witness_rate;
    sc.patch_size = cfg.patch_size;
    sc.seed = cfg.seed;
    sc.validate();

    const mil::SynthDataset ds = mil::synth_bags(sc);
    mil::save_synth_dataset(out_dir, ds);

    int positives = 0;
    std::size_t patches = 0;
    for (const auto& bag : ds.bags) {
        positives += bag.label;
        patches += bag.patches.size();
    }
    std::cout << "wrote " << ds.bags.size() << " bags (" << positives
              << " positive, " << ds.bags.size() - positives << " negative, "
              << patches << " patches) to " << out_dir << "\n";
    return 0;
}

int cmd_folds(const RunConfig& cfg, const std::string& manifest_path, int k,
              const std::string& out_path) {
    const auto entries = mil::load_manifest(manifest_path);
    const mil::FoldPlan plan = mil::make_folds(
        entries, k, cfg.val_fraction, mil::Rng(cfg.seed).fork("folds"));

    json j;
    j["k"] = plan.k;
    json assignment = json::object();
    for (const auto& [patient, fold] : plan.assignment) assignment[patient] = fold;
    j["assignment"] = assignment;
    j["validation"] = plan.validation;
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_text_file(out_path, text);
        std::cout << "wrote fold plan for " << plan.assignment.size()
                  << " patients to " << out_path << "\n";
    }
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& manifest_path,
              const std::string& out_ckpt) {
    const auto entries = mil::load_manifest(manifest_path);
    mil::BagBuildOptions options;
    options.white_threshold = cfg.white_threshold;
    std::vector<mil::Bag> bags =
        mil::build_bags_all(entries, mil::SplitRole::Train, options);
    const int side = patch_side_of(bags);

    auto [train_bags, val_bags] = mil::split_validation_bags(
        std::move(bags), cfg.val_fraction, mil::Rng(cfg.seed).fork("valbags"));
    const mil::TrainConfig tc = train_from(cfg);
    const auto classifier = mil::InstanceClassifierConfig::default_for_patch(side);

    const mil::TrainOutcome outcome =
        mil::train_fold(train_bags, val_bags, classifier, tc);
    mil::save_checkpoint(out_ckpt, outcome.checkpoint);

    const auto& h = outcome.history;
    for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
        std::cout << "epoch " << e << "  train_loss " << h.train_loss[e]
                  << "  val_loss " << h.val_loss[e] << "  val_auc ";
        if (h.val_auc[e]) std::cout << *h.val_auc[e];
        else std::cout << "n/a";
        std::cout << "\n";
    }
    std::cout << "best epoch " << h.best_epoch << "  val_loss " << h.best_val_loss
              << "\nwrote " << out_ckpt << "\n";
    return 0;
}

int cmd_cv(const RunConfig& cfg, const std::string& manifest_path, int k,
           const std::string& out_dir) {
    const auto entries = mil::load_manifest(manifest_path);
    const mil::TrainConfig tc = train_from(cfg);

    // patch side from the first image's bags
    mil::BagBuildOptions options;
    options.white_threshold = cfg.white_threshold;
    const auto probe = mil::build_bags_all({entries.front()}, mil::SplitRole::Test,
                                           options);
    const int side = patch_side_of(probe);
    const auto classifier = mil::InstanceClassifierConfig::default_for_patch(side);

    const mil::CrossValidationResult cv =
        mil::cross_validate(entries, k, classifier, tc, cfg.val_fraction,
                            cfg.threshold, cfg.white_threshold);

    fs::create_directories(out_dir);
    json j;
    j["folds"] = json::array();
    for (const auto& r : cv.fold_reports) j["folds"].push_back(report_to_json(r));
    j["mean"] = report_to_json(cv.mean);
    write_text_file((fs::path(out_dir) / "metrics.json").string(),
                    j.dump(2) + "\n");
    const std::string table = metrics_table(cv.fold_reports, cv.mean);
    write_text_file((fs::path(out_dir) / "metrics.txt").string(), table);
    for (std::size_t f = 0; f < cv.fold_checkpoints.size(); ++f) {
        mil::save_checkpoint(
            (fs::path(out_dir) / ("fold-" + std::to_string(f) + ".ckpt")).string(),
            cv.fold_checkpoints[f]);
    }
    std::cout << table;
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt_path,
             const std::string& manifest_path, const std::string& out_json) {
    const mil::Checkpoint ckpt = mil::load_checkpoint(ckpt_path);
    const auto entries = mil::load_manifest(manifest_path);
    mil::BagBuildOptions options;
    options.white_threshold = cfg.white_threshold;
    const auto bags = mil::build_bags_all(entries, mil::SplitRole::Test, options);
    const mil::EvalResult res = mil::evaluate(ckpt, bags, cfg.threshold);

    json j = report_to_json(res.report);
    j["mean_nll"] = res.mean_nll;
    j["n_bags"] = res.thetas.size();
    const std::string text = j.dump(2) + "\n";
    if (!out_json.empty()) write_text_file(out_json, text);
    std::cout << text;
    return 0;
}

int cmd_roi(const RunConfig& cfg, const std::string& ckpt_path,
            const std::string& image_path, const std::string& out_png,
            const std::string& out_csv) {
    const mil::Checkpoint ckpt = mil::load_checkpoint(ckpt_path);
    mil::SlideImage slide;
    slide.image = mil::load_image(image_path);
    slide.source_path = image_path;
    const mil::RoiResult roi = mil::score_roi(ckpt, slide, cfg.white_threshold);

    mil::save_png_gray(out_png, roi.heatmap_width, roi.heatmap_height,
                       roi.heatmap_gray);
    if (!out_csv.empty()) {
        std::ostringstream os;
        os << "row,col,score,discarded\n";
        char buf[64];
        for (int row = 0; row < roi.grid_rows; ++row) {
            for (int col = 0; col < roi.grid_cols; ++col) {
                const std::size_t i =
                    static_cast<std::size_t>(row) * roi.grid_cols + col;
                std::snprintf(buf, sizeof buf, "%.6f", roi.scores[i]);
                os << row << "," << col << "," << buf << ","
                   << (roi.discarded[i] ? 1 : 0) << "\n";
            }
        }
        write_text_file(out_csv, os.str());
    }
    std::cout << "wrote " << roi.heatmap_width << "x" << roi.heatmap_height
              << " heatmap to " << out_png << "\n";
    return 0;
}

int cmd_gradcheck(const RunConfig& cfg, const std::string& ops, int points) {
    mil::GradCheckOptions opts;
    opts.lse_r = cfg.r;
    opts.seed = cfg.seed;
    opts.points = points;
    if (!ops.empty()) {
        std::stringstream ss(ops);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) opts.components.push_back(tok);
        }
    }
    const auto results = mil::run_gradcheck(opts);
    bool all_pass = true;
    for (const auto& r : results) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-12s max_rel_error %.3e over %d points: %s\n",
                      r.component.c_str(), r.max_rel_error, r.points,
                      r.pass ? "ok" : "FAIL");
        std::cout << buf;
        all_pass = all_pass && r.pass;
    }
    if (!all_pass) {
        std::cout << "gradient check failed (tolerance " << opts.tolerance << ")\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weakly supervised bag classification of image patches with "
                 "permutation-invariant score pooling"};
    app.require_subcommand(1);

    RunConfig cfg;

    // phase 1: apply --config before flag overrides
    try {
        for (int i = 1; i < argc; ++i) {
            const std::string arg = argv[i];
            if (arg == "--config" && i + 1 < argc) {
                apply_config_file(argv[i + 1], cfg);
            } else if (arg.rfind("--config=", 0) == 0) {
                apply_config_file(arg.substr(9), cfg);
            }
        }
    } catch (const mil::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    std::string config_path, out_dir, manifest_path, out_path, ckpt_path,
        image_path, csv_path, ops;
    int folds_k = 4;
    int points = 100;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key=value config file");
        sub->add_option("--seed", cfg.seed, "run seed; all randomness derives from it");
    };
    const auto add_pooling = [&](CLI::App* sub) {
        sub->add_option("--pool", cfg.pool, "pooling operator: max|nor|isr|lse")
            ->check(CLI::IsMember({"max", "nor", "isr", "lse"}));
        sub->add_option("--r", cfg.r, "LSE sharpness r > 0");
        sub->add_option("--epsilon", cfg.epsilon, "score/theta clamp margin");
    };
    const auto add_train_opts = [&](CLI::App* sub) {
        add_pooling(sub);
        sub->add_option("--optimizer", cfg.optimizer, "adam|sgd_momentum")
            ->check(CLI::IsMember({"adam", "sgd_momentum"}));
        sub->add_option("--lr", cfg.learning_rate, "learning rate");
        sub->add_option("--momentum", cfg.momentum, "sgd momentum");
        sub->add_option("--beta1", cfg.beta1, "adam beta1");
        sub->add_option("--beta2", cfg.beta2, "adam beta2");
        sub->add_option("--adam-eps", cfg.adam_epsilon, "adam epsilon");
        sub->add_option("--weight-decay", cfg.weight_decay, "L2 weight decay");
        sub->add_option("--max-epochs", cfg.max_epochs, "epoch cap");
        sub->add_option("--patience", cfg.patience, "early-stop patience (epochs)");
        sub->add_option("--batch-bags", cfg.batch_bags, "bags per gradient step");
        sub->add_option("--augment", cfg.augment, "train-time augmentation: on|off")
            ->check(CLI::IsMember({"on", "off"}));
        sub->add_option("--stain-sigma", cfg.stain_sigma, "stain factor std-dev");
        sub->add_option("--blur-radius-max", cfg.blur_radius_max, "max blur radius (px)");
        sub->add_option("--stain-h", cfg.stain_h, "H stain vector 'r,g,b'");
        sub->add_option("--stain-e", cfg.stain_e, "E stain vector 'r,g,b'");
        sub->add_option("--val-fraction", cfg.val_fraction, "validation fraction");
        sub->add_option("--white-threshold", cfg.white_threshold,
                        "channel floor for a pixel to count as white");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic witness dataset");
    add_common(synth);
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--bags", cfg.bags, "number of bags (even; balanced classes)");
    synth->add_option("--k-min", cfg.k_min, "minimum patches per bag");
    synth->add_option("--k-max", cfg.k_max, "maximum patches per bag");
    synth->add_option("--witness-rate", cfg.witness_rate,
                      "per-patch witness probability in positive bags");
    synth->add_option("--patch-size", cfg.patch_size, "patch side in pixels");

    CLI::App* folds = app.add_subcommand("folds", "plan a patient-level cross-validation");
    add_common(folds);
    folds->add_option("--manifest", manifest_path, "dataset manifest CSV")->required();
    folds->add_option("--folds", folds_k, "fold count");
    folds->add_option("--val-fraction", cfg.val_fraction, "validation fraction");
    folds->add_option("--out", out_path, "write the plan JSON here (default: stdout)");

    CLI::App* train = app.add_subcommand("train", "train one model on a manifest");
    add_common(train);
    add_train_opts(train);
    train->add_option("--manifest", manifest_path, "dataset manifest CSV")->required();
    train->add_option("--out", out_path, "checkpoint output path")->required();

    CLI::App* cv = app.add_subcommand("cv", "k-fold cross-validation with per-fold reports");
    add_common(cv);
    add_train_opts(cv);
    cv->add_option("--manifest", manifest_path, "dataset manifest CSV")->required();
    cv->add_option("--folds", folds_k, "fold count");
    cv->add_option("--threshold", cfg.threshold, "decision threshold");
    cv->add_option("--out-dir", out_dir, "metrics/checkpoint output directory")
        ->required();

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    add_common(eval);
    eval->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    eval->add_option("--manifest", manifest_path, "dataset manifest CSV")->required();
    eval->add_option("--threshold", cfg.threshold, "decision threshold");
    eval->add_option("--white-threshold", cfg.white_threshold,
                     "channel floor for a pixel to count as white");
    eval->add_option("--out", out_path, "also write the metrics JSON here");

    CLI::App* roi = app.add_subcommand("roi", "per-patch score heatmap for one image");
    add_common(roi);
    roi->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    roi->add_option("--image", image_path, "input image (PNG or PPM)")->required();
    roi->add_option("--out", out_path, "heatmap PNG output path")->required();
    roi->add_option("--csv", csv_path, "also write row,col,score,discarded CSV");
    roi->add_option("--white-threshold", cfg.white_threshold,
                    "channel floor for a pixel to count as white");

    CLI::App* gradcheck = app.add_subcommand(
        "gradcheck", "finite-difference verification of all analytic gradients");
    add_common(gradcheck);
    gradcheck->add_option("--ops", ops,
                          "comma list of components (default: all of nor,isr,lse,"
                          "conv2d,maxpool2x2,affine,relu,sigmoid,dropout,bag)");
    gradcheck->add_option("--r", cfg.r, "LSE sharpness to stress");
    gradcheck->add_option("--points", points, "random evaluation points per component");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(cfg, out_dir);
        if (folds->parsed()) return cmd_folds(cfg, manifest_path, folds_k, out_path);
        if (train->parsed()) return cmd_train(cfg, manifest_path, out_path);
        if (cv->parsed()) return cmd_cv(cfg, manifest_path, folds_k, out_dir);
        if (eval->parsed()) return cmd_eval(cfg, ckpt_path, manifest_path, out_path);
        if (roi->parsed()) return cmd_roi(cfg, ckpt_path, image_path, out_path, csv_path);
        if (gradcheck->parsed()) return cmd_gradcheck(cfg, ops, points);
    } catch (const mil::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
