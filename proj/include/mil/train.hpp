#ifndef MIL_TRAIN_HPP
#define MIL_TRAIN_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mil/checkpoint.hpp"
#include "mil/metrics.hpp"

namespace mil {

// Non-finite loss during optimization; names the epoch and bag.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainHistory {
    std::vector<double> train_loss;  // per-epoch mean over bags
    std::vector<double> val_loss;
    std::vector<std::optional<double>> val_auc;  // unset when single-class
    int best_epoch = -1;
    double best_val_loss = 0.0;
};

// Optimizer state shared across steps; sgd_momentum uses `m` as the
// velocity buffer, adam uses both moment buffers plus the step counter.
struct OptimizerState {
    std::vector<LayerParams> m;
    std::vector<LayerParams> v;
    std::int64_t step = 0;

    static OptimizerState for_params(const ModelParams& params);
};

// One update in place; `grads` is the mean gradient of the batch.
// Weight decay enters as an L2 term added to the gradient.
//   sgd_momentum: v <- mu v + g;  theta <- theta - lr v
//   adam:         standard bias-corrected update
void optimizer_step(ModelParams& params, const std::vector<LayerParams>& grads,
                    const TrainConfig& config, OptimizerState& state);

struct TrainOutcome {
    Checkpoint checkpoint;  // parameters of the best-validation epoch
    TrainHistory history;
};

// Minimizes the mean bag NLL: per epoch, shuffles bag order (seeded),
// accumulates bag gradients over batch_bags bags per step, applies the
// optimizer, then scores the validation set (eval mode, no augmentation).
// Stops after `patience` epochs without validation-loss improvement.
TrainOutcome train_fold(const std::vector<Bag>& train_bags,
                        const std::vector<Bag>& val_bags,
                        const InstanceClassifierConfig& classifier,
                        const TrainConfig& config);

struct EvalResult {
    std::vector<double> thetas;  // bag order
    std::vector<int> labels;
    MetricsReport report;
    double mean_nll = 0.0;
};

EvalResult evaluate(const Checkpoint& ckpt, const std::vector<Bag>& bags,
                    double threshold = 0.5);

struct CrossValidationResult {
    std::vector<MetricsReport> fold_reports;
    MetricsReport mean;  // element-wise mean of the fold metrics
    std::vector<Checkpoint> fold_checkpoints;
    std::vector<TrainHistory> fold_histories;
};

// Trains one model per fold (fresh init, seed xor fold index) on the
// fold's train/val split and evaluates on its test bags. When the plan
// reserves no validation patients for a fold (tiny manifests), a
// stratified 10% of the fold's training bags is used instead.
CrossValidationResult cross_validate(const std::vector<ManifestEntry>& entries,
                                     int k,
                                     const InstanceClassifierConfig& classifier,
                                     const TrainConfig& config,
                                     double validation_fraction = 0.1,
                                     double threshold = 0.5,
                                     int white_threshold = 240);

struct RoiResult {
    int grid_rows = 0;
    int grid_cols = 0;
    int tile_side = 0;
    std::vector<double> scores;   // row-major, discarded tiles score 0
    std::vector<bool> discarded;  // white-filtered tiles
    std::vector<std::uint8_t> heatmap_gray;  // upscaled grid, row-major
    int heatmap_width = 0;
    int heatmap_height = 0;
};

// Scores the evaluation view of one image (centered 768 subimage for
// slides, the full strip otherwise) patch by patch. The heatmap is the
// score grid upscaled nearest-neighbor, 0 -> black, 1 -> white;
// white-discarded patches render as score 0 and are flagged.
RoiResult score_roi(const Checkpoint& ckpt, const SlideImage& slide,
                    int white_threshold = 240);

// Splits bags into (train, val) by moving ceil(fraction * n) bags per
// class into validation (at least one per class when the class can
// spare one). Deterministic given rng.
std::pair<std::vector<Bag>, std::vector<Bag>> split_validation_bags(
    std::vector<Bag> bags, double fraction, Rng rng);

double mean_nll(const std::vector<double>& thetas, const std::vector<int>& labels,
                double epsilon = 1e-7);

}  // namespace mil

#endif
