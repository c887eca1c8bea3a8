#include <gsmooth/errors.hpp>
#include <gsmooth/rng.hpp>
#include <gsmooth/trainer.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace gsmooth {

std::string_view to_string(StopMetric metric) { return metric == StopMetric::val_acc ? "val_acc" : "val_loss"; }

StopMetric parse_stop_metric(std::string_view name) {
    if (name == "val_loss" || name == "loss") return StopMetric::val_loss;
    if (name == "val_acc" || name == "acc" || name == "accuracy") return StopMetric::val_acc;
    throw InputError("unknown stop metric '" + std::string(name) + "' (expected val_loss or val_acc)");
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw InputError("train config: lr must be > 0");
    if (!(weight_decay >= 0.0)) throw InputError("train config: weight_decay must be >= 0");
    if (patience < 1) throw InputError("train config: patience must be >= 1");
    if (max_epochs < 1) throw InputError("train config: max_epochs must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw InputError("train config: Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw InputError("train config: adam_eps must be > 0");
    loss.validate();
}

void adam_step(std::span<const AdamParam> params, AdamState& state, const TrainConfig& cfg) {
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
            state.second_moment.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
        }
    }
    if (state.first_moment.size() != params.size()) throw InputError("adam_step: parameter count changed");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.adam_beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& w = *params[i].value;
        const Matrix& g_raw = *params[i].grad;
        if (g_raw.rows() != w.rows() || g_raw.cols() != w.cols()) {
            throw InputError("adam_step: gradient shape differs from parameter " + std::to_string(i));
        }
        Matrix g = g_raw;
        if (params[i].decay && cfg.weight_decay != 0.0) g += cfg.weight_decay * w;
        Matrix& m = state.first_moment[i];
        Matrix& v = state.second_moment[i];
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
        w.array() -= cfg.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + cfg.adam_eps);
    }
}

EarlyStopping::Decision EarlyStopping::update(std::size_t epoch, double val_loss, double val_acc) {
    const double value = metric_ == StopMetric::val_loss ? val_loss : -val_acc;
    Decision d{false, false};
    if (best_epoch_ == 0 || value < best_) {
        best_ = value;
        best_epoch_ = epoch;
        since_best_ = 0;
        d.improved = true;
    } else {
        ++since_best_;
    }
    d.stop = since_best_ >= patience_;
    return d;
}

PreparedData::PreparedData(const LabeledDataset& ds, bool normalize_features)
    : self_looped_(add_self_loops(ds.graph)),
      a_hat_(sym_normalize(self_looped_)),
      labels_(ds.labels),
      n_classes_(ds.n_classes) {
    ds.validate();
    features_ = NodeFeatures::from_dense(normalize_features ? row_normalize_features(ds).features : ds.features);
    targets_ = one_hot(labels_, n_classes_);
}

double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const NodeId> indices) {
    if (indices.empty()) throw InputError("accuracy: empty index set");
    std::size_t correct = 0;
    for (NodeId i : indices) {
        if (i >= labels.size() || static_cast<Eigen::Index>(i) >= logits.rows()) {
            throw InputError("accuracy: index " + std::to_string(i) + " is out of range");
        }
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < logits.cols(); ++j) {
            if (logits(i, j) > logits(i, best)) best = j;
        }
        correct += best == labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

double evaluate(const Model& model, const PreparedData& data, std::span<const NodeId> indices) {
    const ad::Tensor logits = forward(model, data.features(), data.context(), false);
    return accuracy(logits.value(), data.labels(), indices);
}

TrainReport train(Model& model, const PreparedData& data, const Split& split, const TrainConfig& cfg) {
    cfg.validate();
    if (split.train.empty() || split.val.empty()) throw InputError("train: split needs training and validation nodes");

    LossConfig monitor = cfg.loss;
    if (!cfg.monitor_full_objective) monitor.mu = 0.0;

    const auto params = model.parameters();
    std::vector<Matrix> grads(params.size());
    std::vector<Matrix*> values;
    std::vector<AdamParam> adam_params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        ad::Tensor handle = params[i].tensor;
        values.push_back(&handle.mutable_value());
        adam_params.push_back({values.back(), &grads[i], params[i].is_weight || cfg.decay_biases});
    }

    AdamState adam;
    EarlyStopping stopper(cfg.patience, cfg.stop_metric);
    std::vector<Matrix> best_params = model.snapshot();
    TrainReport report;
    const GraphContext ctx = data.context();

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        EpochRecord record{};
        try {
            for (const auto& p : params) ad::Tensor(p.tensor).zero_grad();
            const ad::Tensor logits = forward(model, data.features(), ctx, true, derive_seed(cfg.seed, epoch));
            const ad::Tensor z = softmax_predictions(logits);
            const ad::Tensor loss = combined_loss(z, data.targets(), split.train, data.a_hat(), cfg.loss);
            record.train_loss = loss.item();
            ad::backward(loss);
            for (std::size_t i = 0; i < params.size(); ++i) grads[i] = params[i].tensor.grad();
            adam_step(adam_params, adam, cfg);

            const ad::Tensor eval_logits = forward(model, data.features(), ctx, false);
            const ad::Tensor eval_z = softmax_predictions(eval_logits);
            record.val_loss = combined_loss(eval_z, data.targets(), split.val, data.a_hat(), monitor).item();
            record.val_acc = accuracy(eval_logits.value(), data.labels(), split.val);
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
        }
        for (const Matrix* v : values) {
            if (!v->allFinite()) throw NumericError("epoch " + std::to_string(epoch) + ": parameters became non-finite");
        }
        if (!std::isfinite(record.train_loss) || !std::isfinite(record.val_loss)) {
            throw NumericError("epoch " + std::to_string(epoch) + ": loss is not finite");
        }

        report.history.push_back(record);
        report.epochs_run = epoch;
        const auto decision = stopper.update(epoch, record.val_loss, record.val_acc);
        if (decision.improved) {
            best_params = model.snapshot();
            report.val_acc = record.val_acc;
        }
        if (decision.stop) break;
    }

    report.best_epoch = stopper.best_epoch();
    model.restore(best_params);
    report.test_acc = split.test.empty() ? 0.0 : evaluate(model, data, split.test);
    return report;
}

} // namespace gsmooth
