#include "mil/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mil/errors.hpp"

namespace mil {

OptimizerKind optimizer_from_string(const std::string& name) {
    if (name == "sgd_momentum") return OptimizerKind::SgdMomentum;
    if (name == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + name +
                      "' (expected sgd_momentum or adam)");
}

std::string optimizer_name(OptimizerKind kind) {
    return kind == OptimizerKind::Adam ? "adam" : "sgd_momentum";
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be finite and >= 0");
    }
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (batch_bags < 1) throw ConfigError("batch_bags must be >= 1");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    pooling.validate();
    augment.validate();
}

OptimizerState OptimizerState::for_params(const ModelParams& params) {
    OptimizerState s;
    s.m = zero_grads(params);
    s.v = zero_grads(params);
    return s;
}

namespace {

void step_tensor(Tensor& theta, const Tensor& grad, Tensor& m, Tensor& v,
                 const TrainConfig& cfg, std::int64_t t) {
    for (std::size_t i = 0; i < theta.numel(); ++i) {
        const double g = grad.data[i] + cfg.weight_decay * theta.data[i];
        if (cfg.optimizer == OptimizerKind::SgdMomentum) {
            m.data[i] = cfg.momentum * m.data[i] + g;
            theta.data[i] -= cfg.learning_rate * m.data[i];
        } else {
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m.data[i] / (1.0 - std::pow(cfg.beta1, t));
            const double v_hat = v.data[i] / (1.0 - std::pow(cfg.beta2, t));
            theta.data[i] -=
                cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
        }
    }
}

Bag augmented_bag(const Bag& bag, const TrainConfig& cfg, const Rng& run_rng,
                  int epoch) {
    if (!cfg.augment_enabled) return bag;
    Bag out = bag;
    Rng base = run_rng.fork("augment")
                   .fork(static_cast<std::uint64_t>(epoch))
                   .fork(bag.id);
    for (std::size_t i = 0; i < out.patches.size(); ++i) {
        out.patches[i] =
            augment_pipeline(out.patches[i], cfg.augment, base.fork(i));
    }
    return out;
}

void accumulate(std::vector<LayerParams>& into,
                const std::vector<LayerParams>& grads) {
    for (std::size_t i = 0; i < into.size(); ++i) {
        for (std::size_t j = 0; j < into[i].weight.numel(); ++j) {
            into[i].weight.data[j] += grads[i].weight.data[j];
        }
        for (std::size_t j = 0; j < into[i].bias.numel(); ++j) {
            into[i].bias.data[j] += grads[i].bias.data[j];
        }
    }
}

void scale(std::vector<LayerParams>& grads, double factor) {
    for (auto& g : grads) {
        for (double& x : g.weight.data) x *= factor;
        for (double& x : g.bias.data) x *= factor;
    }
}

void zero(std::vector<LayerParams>& grads) {
    for (auto& g : grads) {
        g.weight.fill(0.0);
        g.bias.fill(0.0);
    }
}

}  // namespace

void optimizer_step(ModelParams& params, const std::vector<LayerParams>& grads,
                    const TrainConfig& config, OptimizerState& state) {
    ++state.step;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        if (params.layers[i].weight.numel() > 0) {
            step_tensor(params.layers[i].weight, grads[i].weight,
                        state.m[i].weight, state.v[i].weight, config, state.step);
        }
        if (params.layers[i].bias.numel() > 0) {
            step_tensor(params.layers[i].bias, grads[i].bias, state.m[i].bias,
                        state.v[i].bias, config, state.step);
        }
    }
}

double mean_nll(const std::vector<double>& thetas, const std::vector<int>& labels,
                double epsilon) {
    if (thetas.size() != labels.size() || thetas.empty()) {
        throw DomainError("mean_nll: mismatched or empty inputs");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        sum += nll_loss(thetas[i], labels[i], epsilon);
    }
    return sum / static_cast<double>(thetas.size());
}

TrainOutcome train_fold(const std::vector<Bag>& train_bags,
                        const std::vector<Bag>& val_bags,
                        const InstanceClassifierConfig& classifier,
                        const TrainConfig& config) {
    config.validate();
    classifier.validate();
    if (train_bags.empty()) throw ConfigError("no training bags");
    if (val_bags.empty()) throw ConfigError("no validation bags");

    const Rng run_rng(config.seed);
    ModelParams params = init_params(classifier, run_rng);
    OptimizerState state = OptimizerState::for_params(params);

    TrainHistory history;
    ModelParams best_params = params;
    double best_loss = std::numeric_limits<double>::infinity();
    int best_epoch = -1;

    std::vector<std::size_t> order(train_bags.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<LayerParams> batch_grads = zero_grads(params);

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        Rng shuffle_rng =
            run_rng.fork("shuffle").fork(static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
        }

        double loss_sum = 0.0;
        zero(batch_grads);
        int in_batch = 0;
        for (std::size_t stepi = 0; stepi < order.size(); ++stepi) {
            const Bag& bag = train_bags[order[stepi]];
            const Bag working = augmented_bag(bag, config, run_rng, epoch);
            Rng bag_rng = run_rng.fork("dropout")
                              .fork(static_cast<std::uint64_t>(epoch))
                              .fork(bag.id);
            BagGradient g;
            try {
                g = bag_gradient(params, classifier, config.pooling, working,
                                 bag.label, bag_rng, config.nll_epsilon);
            } catch (const DomainError& e) {
                // non-finite scores surface here once parameters blow up
                throw TrainingError("training diverged at epoch " +
                                    std::to_string(epoch) + " on bag " + bag.id +
                                    ": " + e.what());
            }
            if (!std::isfinite(g.loss)) {
                throw TrainingError("training diverged at epoch " +
                                    std::to_string(epoch) + " on bag " + bag.id);
            }
            loss_sum += g.loss;
            accumulate(batch_grads, g.grads);
            ++in_batch;
            if (in_batch == config.batch_bags || stepi + 1 == order.size()) {
                scale(batch_grads, 1.0 / in_batch);
                optimizer_step(params, batch_grads, config, state);
                zero(batch_grads);
                in_batch = 0;
            }
        }
        history.train_loss.push_back(loss_sum /
                                     static_cast<double>(train_bags.size()));

        // validation: eval mode, no augmentation
        std::vector<double> thetas;
        std::vector<int> labels;
        thetas.reserve(val_bags.size());
        for (const Bag& bag : val_bags) {
            try {
                const BagPrediction pred =
                    bag_probability(params, classifier, config.pooling, bag,
                                    Mode::Eval, Rng(0));
                thetas.push_back(pred.theta);
            } catch (const DomainError& e) {
                throw TrainingError("training diverged at epoch " +
                                    std::to_string(epoch) + " on bag " + bag.id +
                                    ": " + e.what());
            }
            labels.push_back(bag.label);
        }
        const double vloss = mean_nll(thetas, labels, config.nll_epsilon);
        if (!std::isfinite(vloss)) {
            throw TrainingError("validation loss diverged at epoch " +
                                std::to_string(epoch));
        }
        history.val_loss.push_back(vloss);
        const bool two_class =
            std::count(labels.begin(), labels.end(), 1) > 0 &&
            std::count(labels.begin(), labels.end(), 0) > 0;
        history.val_auc.push_back(
            two_class ? std::optional<double>(auc(thetas, labels)) : std::nullopt);

        if (vloss < best_loss) {
            best_loss = vloss;
            best_epoch = epoch;
            best_params = params;
        }
        if (epoch - best_epoch >= config.patience) break;
    }

    history.best_epoch = best_epoch;
    history.best_val_loss = best_loss;

    TrainOutcome out;
    out.history = std::move(history);
    out.checkpoint.classifier = classifier;
    out.checkpoint.pooling = config.pooling;
    out.checkpoint.params = std::move(best_params);
    out.checkpoint.train_snapshot = config;
    out.checkpoint.best_epoch = best_epoch;
    out.checkpoint.best_val_loss = best_loss;
    return out;
}

EvalResult evaluate(const Checkpoint& ckpt, const std::vector<Bag>& bags,
                    double threshold) {
    if (bags.empty()) throw DomainError("evaluate: no bags");
    EvalResult res;
    res.thetas.reserve(bags.size());
    for (const Bag& bag : bags) {
        const BagPrediction pred = bag_probability(
            ckpt.params, ckpt.classifier, ckpt.pooling, bag, Mode::Eval, Rng(0));
        res.thetas.push_back(pred.theta);
        res.labels.push_back(bag.label);
    }
    res.report = full_report(res.thetas, res.labels, threshold);
    res.mean_nll = mean_nll(res.thetas, res.labels,
                            ckpt.train_snapshot.nll_epsilon);
    return res;
}

std::pair<std::vector<Bag>, std::vector<Bag>> split_validation_bags(
    std::vector<Bag> bags, double fraction, Rng rng) {
    if (fraction < 0.0 || fraction >= 1.0) {
        throw ConfigError("validation fraction must be in [0, 1)");
    }
    std::vector<Bag> train, val;
    for (int label = 0; label <= 1; ++label) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < bags.size(); ++i) {
            if (bags[i].label == label) idx.push_back(i);
        }
        if (idx.empty()) continue;
        Rng stream = rng.fork(label == 0 ? "valsplit/neg" : "valsplit/pos");
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[stream.uniform_int(i)]);
        }
        std::size_t want = static_cast<std::size_t>(
            std::ceil(fraction * static_cast<double>(idx.size())));
        if (fraction > 0.0 && want == 0) want = 1;
        want = std::min(want, idx.size() >= 2 ? idx.size() - 1 : 0);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < want ? val : train).push_back(std::move(bags[idx[i]]));
        }
    }
    if (val.empty() && train.size() >= 2 && fraction > 0.0) {
        // one bag per class: no class can spare one, but the split can
        val.push_back(std::move(train.back()));
        train.pop_back();
    }
    return {std::move(train), std::move(val)};
}

CrossValidationResult cross_validate(const std::vector<ManifestEntry>& entries,
                                     int k,
                                     const InstanceClassifierConfig& classifier,
                                     const TrainConfig& config,
                                     double validation_fraction,
                                     double threshold, int white_threshold) {
    config.validate();
    const FoldPlan plan =
        make_folds(entries, k, validation_fraction, Rng(config.seed).fork("folds"));

    BagBuildOptions options;
    options.white_threshold = white_threshold;

    CrossValidationResult result;
    for (int fold = 0; fold < k; ++fold) {
        std::vector<Bag> train_bags =
            build_bags(entries, plan, fold, SplitRole::Train, options);
        std::vector<Bag> val_bags =
            build_bags(entries, plan, fold, SplitRole::Val, options);
        const std::vector<Bag> test_bags =
            build_bags(entries, plan, fold, SplitRole::Test, options);
        if (val_bags.empty()) {
            // tiny manifests: fall back to a stratified bag-level split
            auto [tr, va] = split_validation_bags(
                std::move(train_bags), validation_fraction,
                Rng(config.seed).fork("valbags").fork(static_cast<std::uint64_t>(fold)));
            train_bags = std::move(tr);
            val_bags = std::move(va);
        }

        TrainConfig fold_config = config;
        fold_config.seed = config.seed ^ static_cast<std::uint64_t>(fold);
        TrainOutcome outcome =
            train_fold(train_bags, val_bags, classifier, fold_config);
        EvalResult eval = evaluate(outcome.checkpoint, test_bags, threshold);

        result.fold_reports.push_back(eval.report);
        result.fold_checkpoints.push_back(std::move(outcome.checkpoint));
        result.fold_histories.push_back(std::move(outcome.history));
    }

    MetricsReport& mean = result.mean;
    mean.threshold = threshold;
    const double nf = static_cast<double>(k);
    for (const auto& r : result.fold_reports) {
        mean.accuracy += r.accuracy / nf;
        mean.precision += r.precision / nf;
        mean.recall += r.recall / nf;
        mean.f_score += r.f_score / nf;
        mean.auc += r.auc / nf;
        mean.tp += r.tp;
        mean.fp += r.fp;
        mean.tn += r.tn;
        mean.fn += r.fn;
        mean.auc_defined = mean.auc_defined || r.auc_defined;
    }
    return result;
}

RoiResult score_roi(const Checkpoint& ckpt, const SlideImage& slide,
                    int white_threshold) {
    std::vector<Patch> patches;
    int grid_rows = 0, grid_cols = 0, tile = 0;
    if (slide.image.width >= kSubimageSide && slide.image.height >= kSubimageSide) {
        const auto subs = extract_subimages(slide, SplitRole::Test);
        patches = tile_patches(subs[0]);
        tile = kPatchSide;
        grid_rows = grid_cols = kSubimageSide / kPatchSide;
    } else {
        tile = slide.image.width;
        if (tile <= 0 || slide.image.height % tile != 0) {
            throw IngestError(slide.source_path + ": not a slide or patch strip");
        }
        patches = tile_patches(slide.image.pixels, slide.image.width,
                               slide.image.height, tile);
        grid_rows = slide.image.height / tile;
        grid_cols = 1;
    }

    RoiResult roi;
    roi.grid_rows = grid_rows;
    roi.grid_cols = grid_cols;
    roi.tile_side = tile;
    roi.scores.assign(static_cast<std::size_t>(grid_rows) * grid_cols, 0.0);
    roi.discarded.assign(roi.scores.size(), false);

    for (const Patch& p : patches) {
        const std::size_t cell =
            static_cast<std::size_t>(p.grid_row) * grid_cols + p.grid_col;
        if (!white_filter_keep(p, white_threshold)) {
            roi.discarded[cell] = true;
            continue;
        }
        roi.scores[cell] = instance_score(ckpt.params, ckpt.classifier,
                                          patch_to_tensor(p), Mode::Eval, Rng(0));
    }

    roi.heatmap_width = grid_cols * tile;
    roi.heatmap_height = grid_rows * tile;
    roi.heatmap_gray.assign(
        static_cast<std::size_t>(roi.heatmap_width) * roi.heatmap_height, 0);
    for (int gy = 0; gy < grid_rows; ++gy) {
        for (int gx = 0; gx < grid_cols; ++gx) {
            const double s = roi.scores[static_cast<std::size_t>(gy) * grid_cols + gx];
            const auto v = static_cast<std::uint8_t>(
                std::clamp(std::llround(s * 255.0), 0LL, 255LL));
            for (int y = 0; y < tile; ++y) {
                std::uint8_t* row =
                    roi.heatmap_gray.data() +
                    (static_cast<std::size_t>(gy) * tile + y) * roi.heatmap_width +
                    static_cast<std::size_t>(gx) * tile;
                std::fill(row, row + tile, v);
            }
        }
    }
    return roi;
}

}  // namespace mil
