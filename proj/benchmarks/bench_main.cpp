#include <gsmooth/diffusion.hpp>
#include <gsmooth/losses.hpp>
#include <gsmooth/synthetic.hpp>
#include <gsmooth/trainer.hpp>

#include <benchmark/benchmark.h>

using namespace gsmooth;

namespace {

LabeledDataset dataset(std::size_t n) {
    SyntheticConfig cfg;
    cfg.n_nodes = n;
    cfg.n_classes = 7;
    cfg.n_features = 500;
    cfg.avg_degree = 4;
    cfg.seed = 1;
    return make_synthetic_dataset(cfg, "bench");
}

NormalizedAdjacency a_hat_of(const LabeledDataset& ds) { return sym_normalize(add_self_loops(ds.graph)); }

void BM_Spmm(benchmark::State& state) {
    const LabeledDataset ds = dataset(static_cast<std::size_t>(state.range(0)));
    const NormalizedAdjacency a = a_hat_of(ds);
    const Matrix h = Matrix::Random(static_cast<Eigen::Index>(a.n_nodes()), 64);
    Matrix out;
    for (auto _ : state) {
        a.multiply_into(h, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.nnz()) * 64);
}
BENCHMARK(BM_Spmm)->Arg(2708)->Arg(20000);

void BM_Diffusion(benchmark::State& state) {
    const LabeledDataset ds = dataset(2708);
    const NormalizedAdjacency a = a_hat_of(ds);
    const Split split = make_split(ds, 20, 0);
    const LabelMatrix y = LabelMatrix::from_labels(ds.labels, split.train, ds.n_classes);
    DiffusionConfig cfg;
    cfg.gamma = 0.1;
    const bool direct = state.range(0) == 1;
    for (auto _ : state) {
        if (direct) {
            benchmark::DoNotOptimize(diffuse_direct(a, y, cfg.gamma).data());
        } else {
            benchmark::DoNotOptimize(diffuse_iterative(a, y, cfg).z.data());
        }
    }
    state.SetLabel(direct ? "direct" : "iterative");
}
BENCHMARK(BM_Diffusion)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TrainEpochs(benchmark::State& state) {
    const LabeledDataset ds = dataset(2708);
    const PreparedData data(ds);
    const Split split = make_split(ds, 20, 0);
    const auto kind = static_cast<ModelKind>(state.range(0));
    TrainConfig cfg;
    cfg.max_epochs = 10;
    cfg.patience = 10;
    cfg.loss.mu = state.range(1) ? 0.5 : 0.0;
    ModelConfig mc;
    mc.kind = kind;
    for (auto _ : state) {
        Model m = Model::create(mc, data.n_features(), data.n_classes(), 3);
        benchmark::DoNotOptimize(train(m, data, split, cfg).test_acc);
    }
    state.SetLabel(std::string(state.range(1) ? "r-" : "") + std::string(to_string(kind)) + ", 10 epochs");
}
BENCHMARK(BM_TrainEpochs)
    ->ArgsProduct({{static_cast<long>(ModelKind::mlp), static_cast<long>(ModelKind::gcn), static_cast<long>(ModelKind::gat),
                    static_cast<long>(ModelKind::appnp)},
                   {0, 1}})
    ->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
