#include <gsmooth/errors.hpp>
#include <gsmooth/experiment.hpp>
#include <gsmooth/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace gsmooth {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ModelVariant::label() const { return (regularized ? "r-" : "") + std::string(to_string(kind)); }

ModelVariant parse_model_variant(std::string_view text) {
    ModelVariant v;
    if (text.size() > 2 && (text.substr(0, 2) == "r-" || text.substr(0, 2) == "R-")) {
        v.regularized = true;
        text.remove_prefix(2);
    }
    v.kind = parse_model_kind(text);
    return v;
}

void ExperimentSpec::validate() const {
    if (models.empty()) throw InputError("experiment: no models listed");
    if (ell.empty() || std::find(ell.begin(), ell.end(), 0u) != ell.end()) {
        throw InputError("experiment: ell must list positive counts");
    }
    if (n_splits < 1) throw InputError("experiment: n_splits must be >= 1");
    if (layer_counts.empty() || std::find(layer_counts.begin(), layer_counts.end(), 0u) != layer_counts.end()) {
        throw InputError("experiment: layer_counts must list positive counts");
    }
    if (mu_grid.empty()) throw InputError("experiment: mu grid is empty");
    for (double mu : mu_grid) {
        if (!(mu >= 0.0) || !std::isfinite(mu)) throw InputError("experiment: mu values must be finite and >= 0");
    }
    model.validate();
    train.validate();
}

namespace {

template <typename T>
std::vector<T> one_or_many(const json& j) {
    if (j.is_array()) return j.get<std::vector<T>>();
    return {j.get<T>()};
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw InputError(where + ": unknown key '" + key + "'");
        }
    }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

} // namespace

ExperimentSpec parse_experiment_spec(const std::string& json_text, const fs::path& base_dir) {
    ExperimentSpec spec;
    try {
        const json j = json::parse(json_text);
        reject_unknown(j,
                       {"dataset", "models", "ell", "n_splits", "layer_counts", "mu", "mu_grid", "base_seed",
                        "output_dir", "threads", "model", "train", "normalize_features", "val_size", "test_size"},
                       "experiment spec");
        spec.dataset = resolve(j.at("dataset").get<std::string>(), base_dir);
        for (const auto& m : j.at("models")) {
            if (m.is_string()) {
                spec.models.push_back(parse_model_variant(m.get<std::string>()));
            } else {
                reject_unknown(m, {"kind", "regularized"}, "experiment spec model entry");
                const auto kind = parse_model_kind(m.at("kind").get<std::string>());
                for (bool r : one_or_many<bool>(m.value("regularized", json(false)))) spec.models.push_back({kind, r});
            }
        }
        if (j.contains("ell")) spec.ell = one_or_many<std::size_t>(j["ell"]);
        spec.n_splits = j.value("n_splits", spec.n_splits);
        if (j.contains("layer_counts")) spec.layer_counts = one_or_many<std::size_t>(j["layer_counts"]);
        if (j.contains("mu")) spec.mu_grid = one_or_many<double>(j["mu"]);
        if (j.contains("mu_grid")) spec.mu_grid = one_or_many<double>(j["mu_grid"]);
        spec.base_seed = j.value("base_seed", spec.base_seed);
        if (j.contains("output_dir")) spec.output_dir = resolve(j["output_dir"].get<std::string>(), base_dir);
        spec.threads = j.value("threads", spec.threads);
        spec.normalize_features = j.value("normalize_features", spec.normalize_features);
        spec.split_sizes.val = j.value("val_size", spec.split_sizes.val);
        spec.split_sizes.test = j.value("test_size", spec.split_sizes.test);
        if (j.contains("model")) {
            const auto& m = j["model"];
            reject_unknown(m, {"hidden_dim", "dropout", "appnp_alpha", "appnp_k", "leaky_slope"}, "experiment spec model");
            spec.model.hidden_dim = m.value("hidden_dim", spec.model.hidden_dim);
            spec.model.dropout = m.value("dropout", spec.model.dropout);
            spec.model.appnp_alpha = m.value("appnp_alpha", spec.model.appnp_alpha);
            spec.model.appnp_k = m.value("appnp_k", spec.model.appnp_k);
            spec.model.leaky_slope = m.value("leaky_slope", spec.model.leaky_slope);
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            reject_unknown(t,
                           {"lr", "weight_decay", "max_epochs", "patience", "smooth_variant", "include_self_loops",
                            "stop_metric", "monitor_full_objective", "decay_biases"},
                           "experiment spec train");
            spec.train.lr = t.value("lr", spec.train.lr);
            spec.train.weight_decay = t.value("weight_decay", spec.train.weight_decay);
            spec.train.max_epochs = t.value("max_epochs", spec.train.max_epochs);
            spec.train.patience = t.value("patience", spec.train.patience);
            if (t.contains("smooth_variant")) {
                spec.train.loss.variant = parse_smooth_variant(t["smooth_variant"].get<std::string>());
            }
            spec.train.loss.include_self_loops = t.value("include_self_loops", spec.train.loss.include_self_loops);
            if (t.contains("stop_metric")) spec.train.stop_metric = parse_stop_metric(t["stop_metric"].get<std::string>());
            spec.train.monitor_full_objective = t.value("monitor_full_objective", spec.train.monitor_full_objective);
            spec.train.decay_biases = t.value("decay_biases", spec.train.decay_biases);
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("experiment spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

ExperimentSpec load_experiment_spec(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open experiment spec " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment_spec(buf.str(), file.parent_path());
}

std::string RunRecord::to_json() const {
    nlohmann::ordered_json j;
    j["model"] = to_string(variant.kind);
    j["regularized"] = variant.regularized;
    j["dataset"] = dataset;
    j["seed"] = seed;
    j["ell"] = ell;
    j["n_layers"] = n_layers;
    j["mu"] = mu;
    j["best_epoch"] = best_epoch;
    j["epochs_run"] = epochs_run;
    j["val_acc"] = val_acc;
    j["test_acc"] = test_acc;
    auto& h = j["history"] = nlohmann::ordered_json::array();
    for (const auto& e : history) {
        h.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"val_acc", e.val_acc}});
    }
    if (!error.empty()) j["error"] = error;
    return j.dump();
}

RunRecord RunRecord::from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        RunRecord r;
        r.variant.kind = parse_model_kind(j.at("model").get<std::string>());
        r.variant.regularized = j.value("regularized", false);
        r.dataset = j.at("dataset").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.ell = j.at("ell").get<std::size_t>();
        r.n_layers = j.value("n_layers", std::size_t{0});
        r.mu = j.at("mu").get<double>();
        r.best_epoch = j.at("best_epoch").get<std::size_t>();
        r.epochs_run = j.value("epochs_run", r.best_epoch);
        r.val_acc = j.value("val_acc", 0.0);
        r.test_acc = j.at("test_acc").get<double>();
        for (const auto& e : j.value("history", json::array())) {
            r.history.push_back({e.at("train_loss").get<double>(), e.at("val_loss").get<double>(),
                                 e.at("val_acc").get<double>()});
        }
        r.error = j.value("error", std::string{});
        return r;
    } catch (const json::exception& e) {
        throw InputError(std::string("run record: ") + e.what());
    }
}

std::string RunRecord::file_name() const {
    char mu_buf[32];
    std::snprintf(mu_buf, sizeof mu_buf, "%g", mu);
    return dataset + "_" + variant.label() + "_ell" + std::to_string(ell) + "_L" + std::to_string(n_layers) + "_mu" +
           mu_buf + "_seed" + std::to_string(seed) + ".json";
}

const ResultRow* ResultsTable::find(ModelKind kind, bool regularized, std::size_t ell, std::size_t n_layers) const {
    for (const auto& row : rows) {
        if (row.variant.kind == kind && row.variant.regularized == regularized && row.ell == ell &&
            row.n_layers == n_layers) {
            return &row;
        }
    }
    return nullptr;
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

} // namespace

std::string ResultsTable::to_csv() const {
    std::ostringstream out;
    out << "dataset,model,regularized,ell,n_layers,mu,mean,std,n_splits,status,diagnostic\n";
    for (const auto& r : rows) {
        out << r.dataset << ',' << to_string(r.variant.kind) << ',' << (r.variant.regularized ? 1 : 0) << ',' << r.ell
            << ',' << r.n_layers << ',' << fixed(r.mu, 4) << ',' << fixed(r.mean, 4) << ',' << fixed(r.std, 4) << ','
            << r.n_splits << ',' << r.status << ',' << csv_quote(r.diagnostic) << '\n';
    }
    return out.str();
}

std::string ResultsTable::to_text() const {
    std::vector<std::array<std::string, 7>> cells;
    cells.push_back({"dataset", "model", "ell", "layers", "mu", "accuracy (%)", "splits"});
    for (const auto& r : rows) {
        const std::string acc = r.status == "ok" ? fixed(r.mean, 1) + " ± " + fixed(r.std, 1) : "FAILED";
        cells.push_back({r.dataset, r.variant.label(), std::to_string(r.ell), std::to_string(r.n_layers),
                         r.variant.regularized ? fixed(r.mu, 2) : "-", acc, std::to_string(r.n_splits)});
    }
    std::array<std::size_t, 7> width{};
    auto display_width = [](const std::string& s) {
        // "±" is two bytes in UTF-8 but one column.
        std::size_t w = 0;
        for (unsigned char c : s) w += (c & 0xC0) != 0x80 ? 1 : 0;
        return w;
    };
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
    }
    std::ostringstream out;
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << row[c] << std::string(width[c] - display_width(row[c]) + (c + 1 < row.size() ? 2 : 0), ' ');
        }
        out << '\n';
    }
    for (const auto& r : rows) {
        if (r.status != "ok") out << "failed " << r.variant.label() << " ell=" << r.ell << " L=" << r.n_layers << ": "
                                  << r.diagnostic << '\n';
    }
    return out.str();
}

std::pair<double, double> mean_and_sample_std(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

ResultsTable aggregate_runs(std::vector<RunRecord> runs) {
    using CellKey = std::tuple<std::string, std::size_t, std::size_t, int, bool>;
    std::sort(runs.begin(), runs.end(), [](const RunRecord& a, const RunRecord& b) {
        return std::tie(a.dataset, a.ell, a.n_layers, a.variant.kind, a.variant.regularized, a.mu, a.seed) <
               std::tie(b.dataset, b.ell, b.n_layers, b.variant.kind, b.variant.regularized, b.mu, b.seed);
    });
    std::map<CellKey, std::vector<const RunRecord*>> cells;
    for (const auto& r : runs) {
        cells[{r.dataset, r.ell, r.n_layers, static_cast<int>(r.variant.kind), r.variant.regularized}].push_back(&r);
    }

    ResultsTable table;
    for (const auto& [key, members] : cells) {
        const RunRecord& first = *members.front();
        ResultRow row;
        row.dataset = first.dataset;
        row.variant = first.variant;
        row.ell = first.ell;
        row.n_layers = first.n_layers;

        const auto failed = std::find_if(members.begin(), members.end(), [](const RunRecord* r) { return !r->error.empty(); });
        if (failed != members.end()) {
            row.status = "failed";
            row.diagnostic = "seed " + std::to_string((*failed)->seed) + ": " + (*failed)->error;
            std::set<std::uint64_t> seeds;
            for (const auto* r : members) seeds.insert(r->seed);
            row.n_splits = seeds.size();
            table.rows.push_back(std::move(row));
            continue;
        }

        std::map<double, std::vector<const RunRecord*>> by_mu;
        for (const auto* r : members) by_mu[r->mu].push_back(r);
        double best_mu = by_mu.begin()->first;
        double best_val = -1.0;
        for (const auto& [mu, group] : by_mu) {
            double val = 0.0;
            for (const auto* r : group) val += r->val_acc;
            val /= static_cast<double>(group.size());
            if (val > best_val) {
                best_val = val;
                best_mu = mu;
            }
        }
        std::vector<double> accs;
        for (const auto* r : by_mu[best_mu]) accs.push_back(100.0 * r->test_acc);
        const auto [mean, sd] = mean_and_sample_std(accs);
        row.mu = best_mu;
        row.mean = mean;
        row.std = sd;
        row.n_splits = accs.size();
        table.rows.push_back(std::move(row));
    }
    return table;
}

ResultsTable aggregate_run_directory(const fs::path& run_dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<RunRecord> runs;
    for (const auto& f : files) {
        std::ifstream in(f);
        std::stringstream buf;
        buf << in.rdbuf();
        runs.push_back(RunRecord::from_json(buf.str()));
    }
    return aggregate_runs(std::move(runs));
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    workers.clear();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct RunTask {
    ModelVariant variant;
    std::size_t ell;
    std::size_t n_layers;
    std::size_t split_index;
    double mu;
};

} // namespace

ResultsTable run_experiment(const ExperimentSpec& spec, const ProgressFn& progress) {
    spec.validate();
    const LabeledDataset ds = load_dataset(spec.dataset);
    return run_experiment(spec, ds, progress);
}

ResultsTable run_experiment(const ExperimentSpec& spec, const LabeledDataset& ds, const ProgressFn& progress) {
    spec.validate();
    const PreparedData data(ds, spec.normalize_features);

    std::map<std::size_t, std::vector<Split>> splits;
    for (std::size_t ell : spec.ell) splits[ell] = make_splits(ds, ell, spec.n_splits, spec.base_seed, spec.split_sizes);

    std::vector<RunTask> tasks;
    for (std::size_t ell : spec.ell) {
        for (std::size_t layers : spec.layer_counts) {
            for (const auto& variant : spec.models) {
                const std::vector<double> mus = variant.regularized ? spec.mu_grid : std::vector<double>{0.0};
                for (std::size_t k = 0; k < spec.n_splits; ++k) {
                    for (double mu : mus) tasks.push_back({variant, ell, layers, k, mu});
                }
            }
        }
    }

    fs::path run_dir;
    if (!spec.output_dir.empty()) {
        run_dir = spec.output_dir / "runs";
        fs::create_directories(run_dir);
    }

    std::vector<RunRecord> records(tasks.size());
    std::mutex progress_mutex;
    parallel_for(tasks.size(), spec.threads, [&](std::size_t i) {
        const RunTask& task = tasks[i];
        const Split& split = splits.at(task.ell)[task.split_index];
        RunRecord& rec = records[i];
        rec.dataset = ds.name;
        rec.variant = task.variant;
        rec.ell = task.ell;
        rec.n_layers = task.n_layers;
        rec.mu = task.mu;
        rec.seed = split.seed;
        try {
            ModelConfig mc = spec.model;
            mc.kind = task.variant.kind;
            mc.n_layers = task.n_layers;
            Model model = Model::create(mc, data.n_features(), data.n_classes(), derive_seed(split.seed, 1));
            TrainConfig tc = spec.train;
            tc.loss.mu = task.mu;
            tc.seed = derive_seed(split.seed, 2);
            const TrainReport report = train(model, data, split, tc);
            rec.best_epoch = report.best_epoch;
            rec.epochs_run = report.epochs_run;
            rec.val_acc = report.val_acc;
            rec.test_acc = report.test_acc;
            rec.history = report.history;
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
        if (!run_dir.empty()) {
            std::ofstream out(run_dir / rec.file_name());
            out << rec.to_json() << '\n';
        }
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(rec);
        }
    });

    ResultsTable table = aggregate_runs(records);
    if (!spec.output_dir.empty()) {
        std::ofstream(spec.output_dir / "results.csv") << table.to_csv();
        std::ofstream(spec.output_dir / "results.txt") << table.to_text();
    }
    return table;
}

PropagationOutcome run_propagation(const LabeledDataset& ds, const Split& split, const DiffusionConfig& cfg) {
    const Graph looped = add_self_loops(ds.graph);
    const NormalizedAdjacency a_hat = sym_normalize(looped);
    const LabelMatrix y = LabelMatrix::from_labels(ds.labels, split.train, ds.n_classes);
    PropagationResult r = propagate_labels(a_hat, y, cfg);

    auto score = [&](std::span<const NodeId> idx) {
        if (idx.empty()) return 0.0;
        std::size_t correct = 0;
        for (NodeId v : idx) correct += r.predicted[v] == ds.labels[v] ? 1 : 0;
        return static_cast<double>(correct) / static_cast<double>(idx.size());
    };
    PropagationOutcome out;
    out.val_acc = score(split.val);
    out.test_acc = score(split.test);
    out.iterations = r.iterations;
    out.warnings = std::move(r.warnings);
    return out;
}

} // namespace gsmooth
