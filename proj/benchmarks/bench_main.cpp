#include <benchmark/benchmark.h>

#include "trav/evaluation.hpp"
#include "trav/model.hpp"
#include "trav/objectives.hpp"
#include "trav/raster.hpp"
#include "trav/rng.hpp"

namespace trav {
namespace {

template <typename S>
RowMatrix<S> random_image(Rng& rng, const EncoderConfig& cfg) {
  RowMatrix<S> img(3, cfg.input_height * cfg.input_width);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<S>(rng.uniform());
  return img;
}

template <typename S>
void BM_NetworkForward(benchmark::State& state) {
  const EncoderConfig cfg;
  const Network<S> net(cfg);
  Rng rng(1);
  const auto img = random_image<S>(rng, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(img));
}
BENCHMARK(BM_NetworkForward<float>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NetworkForward<double>)->Unit(benchmark::kMillisecond);

template <typename S>
void BM_NetworkForwardBackward(benchmark::State& state) {
  const EncoderConfig cfg;
  const Network<S> net(cfg);
  Rng rng(2);
  const auto img = random_image<S>(rng, cfg);
  const int cells = cfg.output_height() * cfg.output_width();
  const RowMatrix<S> d_emb = RowMatrix<S>::Constant(cfg.embed_dim, cells, S(1e-3));
  for (auto _ : state) {
    typename Network<S>::Tape tape;
    net.forward(img, &tape);
    auto grads = net.zero_gradients();
    net.backward(tape, {}, d_emb, d_emb, grads);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_NetworkForwardBackward<float>)->Unit(benchmark::kMillisecond);

void BM_Sinkhorn(benchmark::State& state) {
  Rng rng(3);
  RowMatrix<double> scores(state.range(0), 16);
  for (Eigen::Index i = 0; i < scores.size(); ++i) scores.data()[i] = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn<double>(scores, 0.05, 3));
}
BENCHMARK(BM_Sinkhorn)->Arg(256)->Arg(1024)->Arg(4096);

void BM_RasterizeQuads(benchmark::State& state) {
  Rng rng(4);
  std::vector<PixelPolygon> quads;
  for (int k = 0; k < state.range(0); ++k) {
    PixelPolygon q;
    for (int v = 0; v < 4; ++v) q.emplace_back(rng.uniform(-20, 116), rng.uniform(-20, 84));
    quads.push_back(std::move(q));
  }
  for (auto _ : state) benchmark::DoNotOptimize(rasterize_quads(quads, 96, 64));
}
BENCHMARK(BM_RasterizeQuads)->Arg(1)->Arg(61);

void BM_Auroc(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  std::vector<std::uint8_t> truth(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    truth[i] = rng.bernoulli(0.4) ? 1 : 0;
    scores[i] = std::floor(255.0 * std::min(1.0, rng.uniform() + 0.3 * truth[i])) / 255.0;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(auroc(scores, truth));
    benchmark::DoNotOptimize(pr_metrics(scores, truth));
  }
}
BENCHMARK(BM_Auroc)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace trav

BENCHMARK_MAIN();
