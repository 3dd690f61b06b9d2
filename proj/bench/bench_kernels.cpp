// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to the
// core count; on one core the pairs should match.
#include <benchmark/benchmark.h>

#include <vector>

#include "mirrorfield/analytic.hpp"
#include "mirrorfield/integrator.hpp"
#include "mirrorfield/mlp.hpp"

using namespace mirrorfield;

namespace {

struct RenderCase {
  Preset preset;
  Camera camera;
  std::vector<MirrorSurface> mirrors;
  RenderScene scene;
  IntegratorConfig config;
};

RenderCase& render_case(EstimatorMode mode) {
  static RenderCase dense, sparse;
  RenderCase& c = mode == EstimatorMode::Dense ? dense : sparse;
  if (c.mirrors.empty()) {
    c.preset = make_preset("near-specular");
    DatasetOptions o;
    o.n_train = 1;
    o.n_test = 1;
    o.width = 24;
    o.height = 24;
    c.camera = make_cameras(c.preset, o).back();
    c.mirrors = c.preset.scene.surfaces();
    c.scene.field = &c.preset.scene.medium;
    c.scene.mirrors = c.mirrors;
    c.scene.environment = c.preset.scene.environment;
    c.scene.t_near = c.preset.scene.t_near;
    c.scene.t_far = c.preset.scene.t_far;
    c.config.background_color = c.preset.background;
    c.config.estimator_mode = mode;
  }
  return c;
}

template <bool Parallel>
void BM_RenderImage(benchmark::State& state) {
  const RenderCase& c = render_case(state.range(0) ? EstimatorMode::Dense : EstimatorMode::Sparse);
  for (auto _ : state) {
    RenderOutput out = Parallel ? render_image(c.camera, c.scene, c.config, 1)
                                : render_image_serial(c.camera, c.scene, c.config, 1);
    benchmark::DoNotOptimize(out.pixels.data());
  }
  state.SetItemsProcessed(state.iterations() * c.camera.width * c.camera.height);
}
BENCHMARK(BM_RenderImage<false>)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderImage<true>)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MlpQueryBatch(benchmark::State& state) {
  MlpField net = MlpField::init(MlpArchitecture{}, 3);
  net.set_precision(state.range(0) ? Precision::Float32 : Precision::Float64);
  std::vector<FieldQuery> qs(4096);
  Rng rng(4, 0);
  for (FieldQuery& q : qs) {
    q.position = {rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform()};
    q.direction = normalize(Vec3{rng.uniform() - 0.5, rng.uniform() - 0.5, 1});
  }
  std::vector<FieldSample> out(qs.size());
  for (auto _ : state) {
    net.query_batch(qs, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(qs.size()));
}
BENCHMARK(BM_MlpQueryBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_OracleRender(benchmark::State& state) {
  const RenderCase& c = render_case(EstimatorMode::Dense);
  for (auto _ : state) {
    Image im = oracle_render(c.preset.scene, c.camera, 16, 1);
    benchmark::DoNotOptimize(im.pixels.data());
  }
}
BENCHMARK(BM_OracleRender)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
