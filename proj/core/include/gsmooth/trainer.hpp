#pragma once

#include <gsmooth/data.hpp>
#include <gsmooth/losses.hpp>
#include <gsmooth/models.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gsmooth {

/// Which validation quantity picks the restored epoch.
enum class StopMetric { val_loss, val_acc };

std::string_view to_string(StopMetric metric);
StopMetric parse_stop_metric(std::string_view name);

struct TrainConfig {
    double lr = 0.01;
    double weight_decay = 5e-4;
    std::size_t max_epochs = 1000;
    std::size_t patience = 100;
    LossConfig loss;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    StopMetric stop_metric = StopMetric::val_loss;
    bool decay_biases = false;
    /// Monitor fit + mu * smooth on validation; false monitors the fit term only.
    bool monitor_full_objective = true;

    void validate() const;
};

struct AdamState {
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    std::size_t step = 0;
};

struct AdamParam {
    Matrix* value;
    const Matrix* grad;
    bool decay;  // add weight_decay * value to the gradient
};

/// One bias-corrected Adam update. State is sized lazily on the first call.
void adam_step(std::span<const AdamParam> params, AdamState& state, const TrainConfig& cfg);

/// Patience-window stopping on a validation metric. "Improved" means strictly
/// better than the best value seen so far.
class EarlyStopping {
public:
    EarlyStopping(std::size_t patience, StopMetric metric) : patience_(patience), metric_(metric) {}

    struct Decision {
        bool improved;
        bool stop;
    };
    /// `epoch` is 1-based.
    Decision update(std::size_t epoch, double val_loss, double val_acc);

    std::size_t best_epoch() const { return best_epoch_; }

private:
    std::size_t patience_;
    StopMetric metric_;
    std::size_t best_epoch_ = 0;
    double best_ = 0.0;
    std::size_t since_best_ = 0;
};

/// Dataset tensors and graph views shared read-only by every training run.
/// Not movable: the graph context points into it.
class PreparedData {
public:
    explicit PreparedData(const LabeledDataset& ds, bool normalize_features = true);
    PreparedData(const PreparedData&) = delete;
    PreparedData& operator=(const PreparedData&) = delete;

    const NodeFeatures& features() const { return features_; }
    const Graph& self_looped() const { return self_looped_; }
    const NormalizedAdjacency& a_hat() const { return a_hat_; }
    const Matrix& targets() const { return targets_; }  // one-hot, all rows
    const std::vector<int>& labels() const { return labels_; }
    std::size_t n_classes() const { return n_classes_; }
    std::size_t n_features() const { return static_cast<std::size_t>(features_.cols()); }
    std::size_t n_nodes() const { return labels_.size(); }
    GraphContext context() const { return {&self_looped_, &a_hat_}; }

private:
    NodeFeatures features_;
    Graph self_looped_;
    NormalizedAdjacency a_hat_;
    Matrix targets_;
    std::vector<int> labels_;
    std::size_t n_classes_;
};

struct EpochRecord {
    double train_loss;
    double val_loss;
    double val_acc;
};

struct TrainReport {
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    std::vector<EpochRecord> history;
    double val_acc = 0.0;   // at the restored epoch
    double test_acc = 0.0;  // evaluated once, after restoration
};

/// Fraction of `indices` whose logit argmax (ties to the lowest class)
/// equals the label. Throws InputError when indices is empty.
double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const NodeId> indices);

/// Inference-mode accuracy of `model` on `indices`.
double evaluate(const Model& model, const PreparedData& data, std::span<const NodeId> indices);

/// Full-batch training with Adam and early stopping. Parameters of the best
/// epoch are restored into `model` before the test set is scored. A
/// non-finite loss throws NumericError naming the epoch.
TrainReport train(Model& model, const PreparedData& data, const Split& split, const TrainConfig& cfg);

} // namespace gsmooth
