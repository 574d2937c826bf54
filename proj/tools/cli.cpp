#include "screenaim/cli.hpp"

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>

#include <pthread.h>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "screenaim/camera_sim.hpp"
#include "screenaim/detection.hpp"
#include "screenaim/kv_config.hpp"
#include "screenaim/loadtest.hpp"
#include "screenaim/server.hpp"

namespace screenaim::cli {

namespace {

using Clock = std::chrono::steady_clock;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double aim_error(const AimResult& a, const NormPoint& truth) {
  return std::max(std::abs(a.x_sr - truth.x), std::abs(a.y_sr - truth.y));
}

DetectionConfig detection_config(const std::string& path) {
  return path.empty() ? DetectionConfig{} : DetectionConfig::load(path);
}

// --- serve ----------------------------------------------------------------

struct ServeArgs {
  int tcp_port = 7070;
  int http_port = 8080;
  std::string config;
  std::string web_root;
  std::string bind = "0.0.0.0";
};

int serve(const ServeArgs& a, std::ostream& out) {
  server::ServerOptions opts;
  if (!a.config.empty()) opts.apply_file(a.config);
  opts.tcp_port = static_cast<std::uint16_t>(a.tcp_port);
  opts.http_port = static_cast<std::uint16_t>(a.http_port);
  opts.bind_address = a.bind;
  if (!a.web_root.empty()) opts.web_root = a.web_root;

  // Block the stop signals before any I/O thread exists so only sigwait
  // below receives them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  server::Server srv(opts);
  srv.start();
  out << "tcp_port " << srv.tcp_port() << "\nhttp_port " << srv.http_port() << std::endl;
  srv.run_in_background();
  int sig = 0;
  sigwait(&stop_signals, &sig);
  spdlog::info("signal {}, shutting down", sig);
  srv.stop();
  return kExitOk;
}

// --- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string scene;
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
};

int simulate(const SimulateArgs& a, std::ostream& out) {
  SceneSpec scene = load_scene(a.scene);
  if (a.seed) scene.seed = *a.seed;
  const Rendered r = render(scene);
  const DetectionConfig cfg = detection_config(a.config);

  write_ppm(std::filesystem::path(a.out + ".ppm"), r.frame);
  {
    std::ofstream t(a.out + ".truth.txt");
    t << "aim_sr " << num(r.truth.aim_sr.x) << ' ' << num(r.truth.aim_sr.y) << '\n';
    static const char* names[] = {"tl", "tr", "br", "bl"};
    for (std::size_t i = 0; i < 4; ++i) {
      t << "corner." << names[i] << ' ' << num(r.truth.corners_cr[i].x) << ' '
        << num(r.truth.corners_cr[i].y) << '\n';
    }
    t << "visible " << (r.truth.visible ? 1 : 0) << '\n';
    t << "distance " << num(r.truth.distance) << '\n';
    t << "dist_diag " << num(r.truth.distance / scene.screen.diagonal()) << '\n';
    t << "view_angle_deg " << num(r.truth.view_angle * 180.0 / std::numbers::pi) << '\n';
    if (!t) throw std::runtime_error("cannot write " + a.out + ".truth.txt");
  }

  std::ofstream aim_out(a.out + ".aim.txt");
  try {
    const AimResult aim = detect_aim(r.frame, cfg);
    aim_out << num(aim.x_sr) << ' ' << num(aim.y_sr) << ' ' << to_string(aim.confidence) << '\n';
    out << "aim " << num(aim.x_sr) << ' ' << num(aim.y_sr) << ' ' << to_string(aim.confidence)
        << '\n';
    out << "err_naive " << num(aim_error(aim, r.truth.aim_sr)) << '\n';
  } catch (const NoScreenDetected&) {
    aim_out << "NoScreenDetected\n";
    out << "err_naive NoScreenDetected\n";
  }
  try {
    const AimResult h = aim_from_quad(Quad(r.truth.corners_cr));
    out << "err_homog " << num(aim_error(h, r.truth.aim_sr)) << '\n';
  } catch (const std::exception& e) {
    out << "err_homog " << e.what() << '\n';
  }
  if (!aim_out) throw std::runtime_error("cannot write " + a.out + ".aim.txt");
  return kExitOk;
}

// --- sweep ----------------------------------------------------------------

int sweep(const std::string& scenes, const std::string& csv, const std::string& config,
          std::ostream& out) {
  const auto list = load_scene_list(scenes);
  const auto rows = sweep_report(list, detection_config(config));
  std::ofstream f(csv);
  if (!f) throw std::runtime_error("cannot open " + csv);
  write_sweep_csv(f, rows);
  out << "rows " << rows.size() << '\n';
  return kExitOk;
}

// --- bench ----------------------------------------------------------------

struct BenchArgs {
  int width = 640;
  int height = 480;
  double seconds = 3;
};

int bench(const BenchArgs& a, std::ostream& out) {
  SceneSpec scene;
  scene.screen.interior.kind = Interior::Kind::Random;
  scene.camera = look_at(scene.screen, {0.45, 0.55}, 2.0 * scene.screen.diagonal(), 0.0);
  scene.camera.res_w = a.width;
  scene.camera.res_h = a.height;
  const Rendered r = render(scene);
  const DetectionConfig cfg;
  const AimResult reference = detect_aim(r.frame, cfg);

  using dsec = std::chrono::duration<double>;
  const auto budget = dsec(a.seconds);
  std::uint64_t frames = 0;
  const auto t0 = Clock::now();
  while (Clock::now() - t0 < budget) {
    const AimResult aim = detect_aim(r.frame, cfg);
    if (aim.x_sr != reference.x_sr || aim.y_sr != reference.y_sr) {
      throw std::runtime_error("detect_aim is not deterministic");
    }
    ++frames;
  }
  const double total = dsec(Clock::now() - t0).count();

  // Stage split over a short extra run.
  const int stage_iters = static_cast<int>(std::clamp<std::uint64_t>(frames / 4, 1, 200));
  double t_blobs = 0;
  double t_aim = 0;
  for (int i = 0; i < stage_iters; ++i) {
    const auto s0 = Clock::now();
    const auto blobs = detect_blobs(r.frame, cfg);
    const auto s1 = Clock::now();
    const auto a0 = extents_of(blobs, 0, a.width, a.height);
    const auto a1 = extents_of(blobs, 1, a.width, a.height);
    if (a0 && a1) (void)aim_from_extents(reconcile_extents(*a0, *a1));
    const auto s2 = Clock::now();
    t_blobs += dsec(s1 - s0).count();
    t_aim += dsec(s2 - s1).count();
  }
  out << "resolution " << a.width << 'x' << a.height << '\n';
  out << "frames " << frames << '\n';
  out << "seconds " << num(total) << '\n';
  out << "fps " << num(static_cast<double>(frames) / total) << '\n';
  out << "ms_per_frame " << num(1000.0 * total / static_cast<double>(frames)) << '\n';
  out << "stage.blobs_ms " << num(1000.0 * t_blobs / stage_iters) << '\n';
  out << "stage.aim_ms " << num(1000.0 * t_aim / stage_iters) << '\n';
  return kExitOk;
}

// --- loadtest -------------------------------------------------------------

struct LoadArgs {
  int clients = 10;
  double hz = 30;
  double seconds = 10;
  double fire_hz = 1;
  std::string addr = "127.0.0.1:7070";
  std::string mode = "pointer";
};

int loadtest_cmd(const LoadArgs& a, std::ostream& out) {
  loadtest::LoadTestOptions o;
  const auto colon = a.addr.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw CLI::ValidationError("--addr", "expected host:port");
  }
  o.host = a.addr.substr(0, colon);
  try {
    const int port = std::stoi(a.addr.substr(colon + 1));
    if (port < 1 || port > 65535) throw std::out_of_range("port");
    o.port = static_cast<std::uint16_t>(port);
  } catch (const std::logic_error&) {
    throw CLI::ValidationError("--addr", "bad port in " + a.addr);
  }
  o.clients = a.clients;
  o.hz = a.hz;
  o.seconds = a.seconds;
  o.fire_hz = a.fire_hz;
  o.mode = a.mode == "fire" ? protocol::SendMode::Fire : protocol::SendMode::Pointer;
  const auto report = loadtest::run_loadtest(o);
  out << report.to_text();
  return report.ok() ? kExitOk : kExitRuntime;
}

// --- replay ---------------------------------------------------------------

int replay(const std::string& dir, const std::string& config, const std::string& csv,
           std::ostream& out) {
  const DetectionConfig cfg = detection_config(config);
  std::vector<std::filesystem::path> frames;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".ppm") frames.push_back(e.path());
  }
  std::sort(frames.begin(), frames.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });

  std::ofstream f(csv);
  if (!f) throw std::runtime_error("cannot open " + csv);
  f << "frame,x_sr,y_sr,confidence\n";
  for (const auto& p : frames) {
    const std::string name = p.filename().string();
    try {
      const Frame frame = read_ppm(p);
      const AimResult aim = detect_aim(frame, cfg);
      f << name << ',' << num(aim.x_sr) << ',' << num(aim.y_sr) << ','
        << to_string(aim.confidence) << '\n';
    } catch (const NoScreenDetected&) {
      f << name << ",,,NoScreenDetected\n";
    } catch (const FrameError& e) {
      spdlog::warn("{}: {}", name, e.what());
      f << name << ",,,FrameError\n";
    }
  }
  out << "rows " << frames.size() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Camera-based screen pointer: detection, simulation and pointer server",
               "screenaim"};
  app.require_subcommand(1);
  app.fallthrough(false);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  ServeArgs serve_args;
  auto* s = app.add_subcommand("serve", "Run the pointer server");
  s->add_option("--tcp-port", serve_args.tcp_port, "Native TCP port (0 = ephemeral)")
      ->check(CLI::Range(0, 65535));
  s->add_option("--http-port", serve_args.http_port, "HTTP/WebSocket port (0 = ephemeral)")
      ->check(CLI::Range(0, 65535));
  s->add_option("--config", serve_args.config, "Server key=value config file");
  s->add_option("--web-root", serve_args.web_root, "Directory with controller.html/display.html");
  s->add_option("--bind", serve_args.bind, "Listen address");

  SimulateArgs sim_args;
  std::uint64_t sim_seed = 0;
  auto* sim = app.add_subcommand("simulate", "Render a scene and run detection on it");
  sim->add_option("--scene", sim_args.scene, "Scene file")->required();
  sim->add_option("--out", sim_args.out, "Output prefix")->required();
  sim->add_option("--config", sim_args.config, "Detection config file");
  auto* seed_opt = sim->add_option("--seed", sim_seed, "Override the scene noise seed");

  std::string sweep_scenes, sweep_out, sweep_config;
  auto* sw = app.add_subcommand("sweep", "Accuracy sweep over a scene list, as CSV");
  sw->add_option("--scenes", sweep_scenes, "Scene list file")->required();
  sw->add_option("--out", sweep_out, "CSV output")->required();
  sw->add_option("--config", sweep_config, "Detection config file");

  BenchArgs bench_args;
  auto* b = app.add_subcommand("bench", "Detection throughput on a rendered frame");
  b->add_option("--width", bench_args.width)->check(CLI::Range(16, 16384));
  b->add_option("--height", bench_args.height)->check(CLI::Range(16, 16384));
  b->add_option("--seconds", bench_args.seconds)->check(CLI::PositiveNumber);

  LoadArgs load_args;
  auto* lt = app.add_subcommand("loadtest", "Drive synthetic clients against a server");
  lt->add_option("--clients", load_args.clients)->check(CLI::Range(1, 65535));
  lt->add_option("--hz", load_args.hz, "AimUpdate rate per client")->check(CLI::PositiveNumber);
  lt->add_option("--seconds", load_args.seconds)->check(CLI::PositiveNumber);
  lt->add_option("--addr", load_args.addr, "host:port of the native TCP listener");
  lt->add_option("--fire-hz", load_args.fire_hz, "FireEvent rate per client")
      ->check(CLI::NonNegativeNumber);
  lt->add_option("--mode", load_args.mode, "pointer|fire")
      ->check(CLI::IsMember({"pointer", "fire"}));

  std::string replay_dir, replay_config, replay_out;
  auto* rp = app.add_subcommand("replay", "Run detection over a directory of PPM frames");
  rp->add_option("--dir", replay_dir, "Frame directory")->required()->check(CLI::ExistingDirectory);
  rp->add_option("--config", replay_config, "Detection config file");
  rp->add_option("--out", replay_out, "CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));
  if (!*seed_opt) sim_args.seed.reset();
  else sim_args.seed = sim_seed;

  try {
    if (*s) return serve(serve_args, out);
    if (*sim) return simulate(sim_args, out);
    if (*sw) return sweep(sweep_scenes, sweep_out, sweep_config, out);
    if (*b) return bench(bench_args, out);
    if (*lt) return loadtest_cmd(load_args, out);
    if (*rp) return replay(replay_dir, replay_config, replay_out, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace screenaim::cli
