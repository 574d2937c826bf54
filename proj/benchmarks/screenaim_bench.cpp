#include <benchmark/benchmark.h>

#include "screenaim/camera_sim.hpp"
#include "screenaim/detection.hpp"
#include "screenaim/protocol.hpp"
#include "screenaim/room.hpp"

using namespace screenaim;

namespace {

Frame scene_frame(int w, int h) {
  SceneSpec s;
  s.screen.border_frac = 0.08;
  s.screen.segment = 0.25;
  s.screen.interior.kind = Interior::Kind::Random;
  s.camera = look_at(s.screen, {0.45, 0.55}, 2.0 * s.screen.diagonal(), 0.3);
  s.camera.res_w = w;
  s.camera.res_h = h;
  return render(s).frame;
}

void BM_DetectAim(benchmark::State& state) {
  const Frame f = scene_frame(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const DetectionConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(detect_aim(f, cfg));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DetectAim)->Args({320, 240})->Args({640, 480})->Args({1280, 720});

void BM_DetectBlobs(benchmark::State& state) {
  const Frame f = scene_frame(640, 480);
  const DetectionConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(detect_blobs(f, cfg));
}
BENCHMARK(BM_DetectBlobs);

void BM_Render(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(scene_frame(640, 480));
}
BENCHMARK(BM_Render);

void BM_EncodeDecodeBatch(benchmark::State& state) {
  protocol::PointerBatch b;
  b.entries.resize(static_cast<std::size_t>(state.range(0)));
  const protocol::WireMessage m = b;
  for (auto _ : state) benchmark::DoNotOptimize(protocol::decode(protocol::encode(m)));
}
BENCHMARK(BM_EncodeDecodeBatch)->Arg(1)->Arg(255);

struct NullSink : server::ClientSink {
  bool send(server::Bytes) override { return true; }
  void close(std::string_view) override {}
};

void BM_RoomTick(benchmark::State& state) {
  server::Room room{server::RoomConfig{}};
  room.join(protocol::Hello{protocol::Role::Display}, std::make_shared<NullSink>(), 0);
  const auto aim = protocol::encode(protocol::AimUpdate{100, 200, protocol::kFlagOnScreen});
  for (int i = 0; i < state.range(0); ++i) {
    const auto id = room.join(protocol::Hello{}, std::make_shared<NullSink>(), 0);
    room.ingest(id, aim, 0);
  }
  std::int64_t t = 0;
  for (auto _ : state) benchmark::DoNotOptimize(room.broadcast_tick(t++));
}
BENCHMARK(BM_RoomTick)->Arg(10)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
