#include "commands.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "estimator_bench.hpp"
#include "manifest.hpp"
#include "mirrorfield/analytic.hpp"
#include "mirrorfield/error.hpp"
#include "mirrorfield/image.hpp"
#include "mirrorfield/scene.hpp"
#include "mirrorfield/trainer.hpp"

namespace mirrorfield::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ULL;

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream f(p, mode);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + p.string());
  return f;
}

// Shared flags. Values given on the command line override --config.
struct Common {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string config_path;
  std::string out;
  Json flags = Json::object();
};

void add_common(CLI::App* sub, Common& c, bool needs_out) {
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--threads", c.threads, "OpenMP threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* out = sub->add_option("--out", c.out, "Output directory");
  if (needs_out) out->required();
}

template <typename T>
void flag_into(Json& j, const std::string& key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

// defaults <- config file <- flags. The seed lands in config["seed"].
Json resolve(Json defaults, const Common& c) {
  if (!c.config_path.empty()) {
    const Json file = read_json(c.config_path, ErrorKind::Config);
    if (!file.is_object()) throw Error(ErrorKind::Config, "config file must hold an object");
    merge_json(defaults, file);
  }
  merge_json(defaults, c.flags);
  if (c.seed) defaults["seed"] = *c.seed;
  if (!defaults.contains("seed")) defaults["seed"] = 0;
  return defaults;
}

std::uint64_t seed_of(const Json& cfg) { return get_field<std::uint64_t>(cfg, "seed", "config", ErrorKind::Config); }

void check_keys(const Json& cfg, std::initializer_list<const char*> keys, const std::string& cmd) {
  for (const auto& item : cfg.items()) {
    bool ok = false;
    for (const char* k : keys) ok = ok || item.key() == k;
    if (!ok) throw Error(ErrorKind::Config, "unknown " + cmd + " config key '" + item.key() + "'");
  }
}

// --- dataset and model loading ---------------------------------------------

struct Data {
  fs::path dir;
  SceneFile scene;
  std::vector<MirrorSurface> mirrors;
};

Data load_data(const fs::path& dir, RunManifest& m) {
  Data d;
  d.dir = dir;
  m.add_input(dir / "scene.json");
  d.scene = load_scene(dir / "scene.json");
  if (!d.scene.annotations.empty()) m.add_input(dir / d.scene.annotations);
  d.mirrors = resolve_mirrors(d.scene, dir);
  return d;
}

std::vector<int> split_views(const Data& d, const Json& views) {
  if (views.is_string()) {
    const std::string s = views.get<std::string>();
    if (s == "test") return d.scene.test;
    if (s == "train") return d.scene.train;
    if (s == "all") {
      std::vector<int> all;
      for (int i = 0; i < static_cast<int>(d.scene.cameras.size()); ++i) all.push_back(i);
      return all;
    }
    throw Error(ErrorKind::Config, "views must be test, train, all or a list of indices");
  }
  std::vector<int> out;
  try {
    out = views.get<std::vector<int>>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::Config, "views must be test, train, all or a list of indices");
  }
  for (const int i : out) {
    if (i < 0 || i >= static_cast<int>(d.scene.cameras.size())) {
      throw Error(ErrorKind::Config, "view index out of range: " + std::to_string(i));
    }
  }
  return out;
}

struct Model {
  Json meta;
  std::unique_ptr<MlpField> field;
  std::unique_ptr<MlpField> coarse;
  IntegratorConfig integrator;
};

Model load_model(const fs::path& dir, RunManifest& m) {
  Model model;
  m.add_input(dir / "model.json");
  model.meta = read_json(dir / "model.json");
  m.add_input(dir / "model.mfck");
  model.field = std::make_unique<MlpField>(load_checkpoint(dir / "model.mfck"));
  const bool twin = get_field<bool>(model.meta, "twin_networks", "model");
  if (twin) {
    m.add_input(dir / "model_coarse.mfck");
    model.coarse = std::make_unique<MlpField>(load_checkpoint(dir / "model_coarse.mfck"));
  }
  const Precision p = precision_from_string(get_field<std::string>(model.meta, "precision", "model"));
  model.field->set_precision(p);
  if (model.coarse) model.coarse->set_precision(p);
  model.integrator = integrator_config_from_json(model.meta.at("integrator"));
  return model;
}

RenderScene model_scene(const Model& model, const Data& d) {
  RenderScene s;
  s.field = model.field.get();
  s.coarse_field = model.coarse.get();
  s.mirrors = d.mirrors;
  s.t_near = d.scene.t_near;
  s.t_far = d.scene.t_far;
  return s;
}

Image to_image(const RenderOutput& out) {
  Image img(out.width, out.height);
  img.pixels = out.pixels;
  return img;
}

std::string view_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03d", i);
  return buf;
}

std::uint64_t view_seed(std::uint64_t seed, int view) {
  return Rng::mix(seed + 1 + static_cast<std::uint64_t>(view));
}

// --- generate ---------------------------------------------------------------

int cmd_generate(const Json& cfg, const fs::path& out) {
  check_keys(cfg, {"preset", "n_train", "n_test", "width", "height", "radius", "spp", "seed"},
             "generate");
  const std::string w = "generate";
  const Preset preset = make_preset(get_field<std::string>(cfg, "preset", w, ErrorKind::Config));
  DatasetOptions o;
  o.n_train = get_field_or<int>(cfg, "n_train", o.n_train, w, ErrorKind::Config);
  o.n_test = get_field_or<int>(cfg, "n_test", o.n_test, w, ErrorKind::Config);
  o.width = get_field_or<int>(cfg, "width", o.width, w, ErrorKind::Config);
  o.height = get_field_or<int>(cfg, "height", o.height, w, ErrorKind::Config);
  o.radius = get_field_or<double>(cfg, "radius", o.radius, w, ErrorKind::Config);
  o.spp = get_field_or<int>(cfg, "spp", o.spp, w, ErrorKind::Config);
  o.seed = seed_of(cfg);
  write_manifest(out, make_manifest("generate", cfg, o.seed));
  generate_dataset(preset, o, out);
  return 0;
}

// --- triangulate ------------------------------------------------------------

int cmd_triangulate(const Json& cfg, const fs::path& out) {
  check_keys(cfg, {"scene", "annotations", "noise_px", "trials", "seed"}, "triangulate");
  const std::string w = "triangulate";
  const fs::path scene_path = get_field<std::string>(cfg, "scene", w, ErrorKind::Config);
  const auto noise = get_field<std::vector<double>>(cfg, "noise_px", w, ErrorKind::Config);
  const int trials = get_field<int>(cfg, "trials", w, ErrorKind::Config);
  const std::uint64_t seed = seed_of(cfg);
  if (trials < 1) throw Error(ErrorKind::Config, "trials must be >= 1");
  for (const double k : noise) {
    if (!(k >= 0)) throw Error(ErrorKind::Config, "noise levels must be >= 0");
  }

  RunManifest m = make_manifest("triangulate", cfg, seed);
  m.add_input(scene_path);
  const SceneFile scene = load_scene(scene_path);
  const fs::path dir = scene_path.parent_path();
  fs::path ann_path = get_field_or<std::string>(cfg, "annotations", "", w, ErrorKind::Config);
  if (ann_path.empty()) {
    if (scene.annotations.empty()) throw Error(ErrorKind::Data, "scene has no annotation file");
    ann_path = dir / scene.annotations;
  }
  m.add_input(ann_path);
  const fs::path truth_path = dir / "ground_truth.json";
  const bool has_truth = fs::exists(truth_path);
  if (has_truth) m.add_input(truth_path);
  write_manifest(out, m);

  const std::vector<VertexAnnotation> annotations = load_annotations(ann_path);
  std::vector<int> ids;
  for (const SceneMirror& sm : scene.mirrors) ids.insert(ids.end(), sm.vertex_ids.begin(), sm.vertex_ids.end());
  if (ids.empty()) throw Error(ErrorKind::Data, "no annotated mirror vertices in the scene");

  const std::vector<Vec3> clean = triangulate_corners(annotations, scene.cameras, ids);
  std::vector<Vec3> reference = clean;
  if (has_truth) {
    const Json truth = read_json(truth_path);
    const Json& verts = truth.at("mirror_vertices");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto id = static_cast<std::size_t>(ids[i]);
      if (id >= verts.size()) throw Error(ErrorKind::Data, "ground truth lacks vertex " + std::to_string(id));
      reference[i] = vec3_from_json(verts[id], "ground truth vertex");
    }
  }

  Json mirrors = Json::array();
  std::size_t offset = 0;
  for (const SceneMirror& sm : scene.mirrors) {
    if (sm.vertex_ids.empty()) continue;
    const std::vector<Vec3> corners(clean.begin() + static_cast<long>(offset),
                                    clean.begin() + static_cast<long>(offset + sm.vertex_ids.size()));
    offset += sm.vertex_ids.size();
    const MirrorSurface surface = make_mirror(corners, sm.material);
    Json jm = {{"vertex_ids", sm.vertex_ids},
               {"normal", to_json(surface.normal)},
               {"roughness_alpha", sm.material.roughness_alpha},
               {"fresnel_f0", sm.material.fresnel_f0}};
    jm["vertices"] = Json::array();
    for (const Vec3& c : corners) jm["vertices"].push_back(to_json(c));
    mirrors.push_back(jm);
  }
  write_json(out / "mirrors.json", {{"mirrors", mirrors}});

  std::ofstream csv = open_out(out / "triangulation.csv");
  csv << "noise_px,trials,failures,mean_vertex_error,max_vertex_error\n";
  for (const double k : noise) {
    double sum = 0, worst = 0;
    int ok = 0, failures = 0;
    for (int t = 0; t < trials; ++t) {
      // The same unit offsets at every noise level, scaled by k.
      Rng rng(seed, static_cast<std::uint64_t>(t));
      std::vector<VertexAnnotation> noisy = annotations;
      for (VertexAnnotation& a : noisy) {
        a.pixel.x += k * (2 * rng.uniform() - 1);
        a.pixel.y += k * (2 * rng.uniform() - 1);
      }
      try {
        const std::vector<Vec3> est = triangulate_corners(noisy, scene.cameras, ids);
        double e = 0;
        for (std::size_t i = 0; i < est.size(); ++i) e += length(est[i] - reference[i]);
        e /= static_cast<double>(est.size());
        sum += e;
        worst = std::max(worst, e);
        ++ok;
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::DegenerateRays) throw;
        ++failures;
      }
    }
    csv << num(k) << ',' << trials << ',' << failures << ','
        << num(ok ? sum / ok : std::nan("")) << ',' << num(ok ? worst : std::nan("")) << '\n';
  }
  return 0;
}

// --- train ------------------------------------------------------------------

void write_model(const fs::path& out, const Json& meta, const MlpField& field,
                 const MlpField* coarse) {
  save_checkpoint(out / "model.mfck", field);
  if (coarse != nullptr) save_checkpoint(out / "model_coarse.mfck", *coarse);
  write_json(out / "model.json", meta);
}

std::string loss_line(const LossRecord& r) {
  return std::to_string(r.iteration) + ',' + num(r.coarse_loss) + ',' + num(r.fine_loss) + ',' +
         num(r.psnr_probe) + '\n';
}

constexpr const char* kLossHeader = "iteration,coarse_loss,fine_loss,psnr_on_probe_view\n";

// Keeps the header and the rows up to `iteration` of an earlier run.
void truncate_loss_csv(const fs::path& path, std::uint64_t iteration) {
  std::string kept = kLossHeader;
  std::ifstream in(path);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoull(line.substr(0, line.find(','))) <= iteration) kept += line + '\n';
  }
  in.close();
  open_out(path) << kept;
}

int cmd_train(const Json& cfg, const fs::path& out) {
  check_keys(cfg, {"data", "seed", "resume", "probe_view", "train", "network", "integrator"},
             "train");
  const std::string w = "train";
  const fs::path data_dir = get_field<std::string>(cfg, "data", w, ErrorKind::Config);
  TrainConfig tc = train_config_from_json(cfg.value("train", Json::object()));
  tc.seed = seed_of(cfg);
  const MlpArchitecture arch = architecture_from_json(cfg.value("network", Json::object()));
  IntegratorConfig ic = integrator_config_from_json(cfg.value("integrator", Json::object()));
  const bool resume = get_field_or<bool>(cfg, "resume", false, w, ErrorKind::Config);

  RunManifest m = make_manifest("train", cfg, tc.seed);
  const Data d = load_data(data_dir, m);
  for (const int i : d.scene.train) m.add_input(data_dir / d.scene.images[static_cast<std::size_t>(i)]);
  if (d.scene.train.empty()) throw Error(ErrorKind::Data, "dataset has no training views");
  int probe = d.scene.test.empty() ? d.scene.train.front() : d.scene.test.front();
  probe = get_field_or<int>(cfg, "probe_view", probe, w, ErrorKind::Config);
  if (probe < 0 || probe >= static_cast<int>(d.scene.cameras.size())) {
    throw Error(ErrorKind::Config, "probe_view out of range");
  }
  m.add_input(data_dir / d.scene.images[static_cast<std::size_t>(probe)]);
  write_manifest(out, m);

  ic.background_color = d.scene.background;
  Dataset ds;
  for (const int i : d.scene.train) ds.cameras.push_back(d.scene.cameras[static_cast<std::size_t>(i)]);
  ds.images = load_images(d.scene, data_dir, d.scene.train);

  MlpField field = MlpField::init(arch, Rng::mix(tc.seed ^ kInitStream));
  std::unique_ptr<MlpField> coarse;
  if (tc.twin_networks) {
    coarse = std::make_unique<MlpField>(MlpField::init(arch, Rng::mix(tc.seed ^ kInitStream ^ 1)));
  }

  TrainSetup setup;
  setup.field = &field;
  setup.coarse_field = coarse.get();
  setup.mirrors = d.mirrors;
  setup.t_near = d.scene.t_near;
  setup.t_far = d.scene.t_far;
  setup.probe_camera = d.scene.cameras[static_cast<std::size_t>(probe)];
  setup.probe_image = load_images(d.scene, data_dir, {probe}).front();

  const fs::path state_path = out / "state.mfts";
  const fs::path loss_path = out / "loss.csv";
  TrainState state;
  if (resume && fs::exists(state_path)) {
    state = load_train_state(state_path);
    truncate_loss_csv(loss_path, state.iteration);
  } else {
    std::vector<double> p(field.parameters().begin(), field.parameters().end());
    if (coarse) p.insert(p.end(), coarse->parameters().begin(), coarse->parameters().end());
    state = TrainState::fresh(std::move(p));
    open_out(loss_path) << kLossHeader;
  }

  Json meta = {{"network", to_json(arch)},
               {"integrator", to_json(ic)},
               {"train", to_json(tc)},
               {"twin_networks", tc.twin_networks},
               {"precision", to_string(tc.precision)},
               {"data", data_dir.generic_string()}};
  auto save_all = [&](const TrainState& s) {
    meta["iterations_completed"] = s.iteration;
    meta["skipped_batches"] = s.skipped_batches;
    save_train_state(state_path, s);
    write_model(out, meta, field, coarse.get());
  };

  std::uint64_t skipped = state.skipped_batches;
  TrainHooks hooks;
  hooks.on_log = [&](const LossRecord& r) {
    std::ofstream csv = open_out(loss_path, std::ios::app);
    csv << loss_line(r);
    if (state.skipped_batches != skipped) {
      std::cerr << "train: " << state.skipped_batches - skipped
                << " batch(es) skipped for non-finite gradients before iteration " << r.iteration
                << '\n';
      skipped = state.skipped_batches;
    }
  };
  hooks.on_checkpoint = save_all;
  train(ds, setup, ic, tc, state, hooks);
  save_all(state);
  return 0;
}

// --- render -----------------------------------------------------------------

int cmd_render(const Json& cfg, const fs::path& out) {
  check_keys(cfg, {"model", "data", "views", "camera", "alpha_override", "integrator", "seed"},
             "render");
  const std::string w = "render";
  const fs::path model_dir = get_field<std::string>(cfg, "model", w, ErrorKind::Config);
  const std::uint64_t seed = seed_of(cfg);
  RunManifest m = make_manifest("render", cfg, seed);
  Model model = load_model(model_dir, m);
  const fs::path data_dir = get_field_or<std::string>(
      cfg, "data", get_field<std::string>(model.meta, "data", "model"), w, ErrorKind::Config);
  const Data d = load_data(data_dir, m);
  write_manifest(out, m);

  IntegratorConfig ic = integrator_config_from_json(cfg.value("integrator", Json::object()),
                                                    model.integrator);
  ic.background_color = d.scene.background;
  if (cfg.contains("alpha_override") && !cfg["alpha_override"].is_null()) {
    ic.alpha_override = get_field<double>(cfg, "alpha_override", w, ErrorKind::Config);
  }
  ic.validate();
  const RenderScene scene = model_scene(model, d);

  std::vector<std::pair<std::string, Camera>> jobs;
  if (cfg.contains("camera")) {
    jobs.emplace_back("pose", camera_from_json(cfg["camera"]));
  } else {
    for (const int i : split_views(d, cfg.value("views", Json("test")))) {
      jobs.emplace_back(view_name(i), d.scene.cameras[static_cast<std::size_t>(i)]);
    }
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Image img =
        to_image(render_image(jobs[j].second, scene, ic, view_seed(seed, static_cast<int>(j))));
    write_image(out / (jobs[j].first + ".pfm"), img);
    write_image(out / (jobs[j].first + ".png"), img);
  }
  return 0;
}

// --- eval -------------------------------------------------------------------

int cmd_eval(const Json& cfg, const fs::path& out) {
  check_keys(cfg, {"data", "model", "predictions", "views", "integrator", "seed"}, "eval");
  const std::string w = "eval";
  const fs::path data_dir = get_field<std::string>(cfg, "data", w, ErrorKind::Config);
  const std::string model_dir = get_field_or<std::string>(cfg, "model", "", w, ErrorKind::Config);
  const std::string pred_dir = get_field_or<std::string>(cfg, "predictions", "", w, ErrorKind::Config);
  if (model_dir.empty() == pred_dir.empty()) {
    throw Error(ErrorKind::Config, "eval needs exactly one of model or predictions");
  }
  const std::uint64_t seed = seed_of(cfg);
  RunManifest m = make_manifest("eval", cfg, seed);
  const Data d = load_data(data_dir, m);
  const std::vector<int> views = split_views(d, cfg.value("views", Json("test")));
  if (views.empty()) throw Error(ErrorKind::Data, "no views to evaluate");
  Model model;
  if (!model_dir.empty()) model = load_model(model_dir, m);
  for (const int i : views) {
    const std::string& name = d.scene.images[static_cast<std::size_t>(i)];
    m.add_input(data_dir / name);
    if (!pred_dir.empty()) m.add_input(fs::path(pred_dir) / name);
  }
  std::optional<AnalyticScene> truth;
  if (fs::exists(data_dir / "ground_truth.json")) {
    m.add_input(data_dir / "ground_truth.json");
    truth = analytic_scene_from_json(read_json(data_dir / "ground_truth.json").at("scene"));
  }
  write_manifest(out, m);

  IntegratorConfig ic;
  if (model.field) {
    ic = integrator_config_from_json(cfg.value("integrator", Json::object()), model.integrator);
    ic.background_color = d.scene.background;
  }
  RenderScene geometry;
  geometry.mirrors = d.mirrors;
  geometry.t_near = d.scene.t_near;
  geometry.t_far = d.scene.t_far;

  std::ofstream csv = open_out(out / "metrics.csv");
  csv << "view,psnr,ssim,mirror_psnr,hidden_psnr\n";
  std::vector<std::array<double, 4>> rows;
  for (std::size_t j = 0; j < views.size(); ++j) {
    const auto i = static_cast<std::size_t>(views[j]);
    const Camera& cam = d.scene.cameras[i];
    const Image ref = read_image(data_dir / d.scene.images[i]);
    Image pred = model.field ? to_image(render_image(cam, model_scene(model, d), ic,
                                                     view_seed(seed, static_cast<int>(j))))
                             : read_image(fs::path(pred_dir) / d.scene.images[i]);
    if (pred.width != ref.width || pred.height != ref.height) {
      throw Error(ErrorKind::Data, "prediction size differs for view " + std::to_string(i));
    }
    const Image a = srgb8_view(pred), b = srgb8_view(ref);
    std::array<double, 4> r{psnr(a, b), ssim(a, b), psnr_masked(a, b, mirror_path_mask(cam, geometry)),
                            std::nan("")};
    if (truth) r[3] = psnr_masked(a, b, hidden_region_mask(*truth, cam));
    rows.push_back(r);
    csv << i << ',' << num(r[0]) << ',' << num(r[1]) << ',' << num(r[2]) << ',' << num(r[3]) << '\n';
  }
  // Mean and population std over views, skipping views where a masked
  // metric is undefined (empty mask).
  std::array<double, 4> mean{}, stdev{};
  for (int c = 0; c < 4; ++c) {
    std::vector<double> vals;
    for (const auto& r : rows) {
      if (!std::isnan(r[c])) vals.push_back(r[c]);
    }
    if (vals.empty()) {
      mean[c] = stdev[c] = std::nan("");
      continue;
    }
    double s = 0;
    for (const double v : vals) s += v;
    mean[c] = s / static_cast<double>(vals.size());
    if (std::isinf(mean[c])) {
      bool all_same = true;
      for (const double v : vals) all_same = all_same && v == mean[c];
      stdev[c] = all_same ? 0.0 : std::nan("");
      continue;
    }
    double q = 0;
    for (const double v : vals) q += (v - mean[c]) * (v - mean[c]);
    stdev[c] = std::sqrt(q / static_cast<double>(vals.size()));
  }
  csv << "mean," << num(mean[0]) << ',' << num(mean[1]) << ',' << num(mean[2]) << ','
      << num(mean[3]) << '\n';
  csv << "std," << num(stdev[0]) << ',' << num(stdev[1]) << ',' << num(stdev[2]) << ','
      << num(stdev[3]) << '\n';
  return 0;
}

// --- bench ------------------------------------------------------------------

int cmd_bench(const Json& cfg, const fs::path& out) {
  check_keys(cfg,
             {"preset", "data", "model", "view", "width", "height", "budgets", "modes", "runs",
              "k_samples", "seed"},
             "bench");
  const std::string w = "bench";
  const std::uint64_t seed = seed_of(cfg);
  const auto budgets = get_field<std::vector<int>>(cfg, "budgets", w, ErrorKind::Config);
  const auto modes = get_field<std::vector<std::string>>(cfg, "modes", w, ErrorKind::Config);
  const int runs = get_field<int>(cfg, "runs", w, ErrorKind::Config);
  const int k_samples = get_field<int>(cfg, "k_samples", w, ErrorKind::Config);
  if (budgets.empty() || modes.empty()) throw Error(ErrorKind::Config, "budgets and modes must be non-empty");
  std::vector<EstimatorMode> mode_list;
  for (const std::string& s : modes) {
    const EstimatorMode mode = estimator_mode_from_string(s);
    if (mode == EstimatorMode::Delta) throw Error(ErrorKind::Config, "bench compares sparse and dense");
    mode_list.push_back(mode);
  }
  RunManifest m = make_manifest("bench", cfg, seed);

  // Scene: an analytic preset, a generated dataset's ground truth, or a
  // trained model on a dataset.
  std::optional<AnalyticScene> analytic;
  std::vector<MirrorSurface> mirrors;
  std::optional<Model> model;
  Camera camera;
  IntegratorConfig base;
  double t_near = 0, t_far = 0;
  const std::string data_dir = get_field_or<std::string>(cfg, "data", "", w, ErrorKind::Config);
  if (data_dir.empty()) {
    const Preset preset =
        make_preset(get_field_or<std::string>(cfg, "preset", "near-specular", w, ErrorKind::Config));
    DatasetOptions o;
    o.n_train = 1;
    o.n_test = 1;
    o.width = get_field_or<int>(cfg, "width", 32, w, ErrorKind::Config);
    o.height = get_field_or<int>(cfg, "height", 32, w, ErrorKind::Config);
    o.seed = seed;
    camera = make_cameras(preset, o).back();
    analytic = preset.scene;
    base.background_color = preset.background;
  } else {
    Data d = load_data(data_dir, m);
    const int view = get_field_or<int>(cfg, "view", d.scene.test.empty() ? 0 : d.scene.test.front(),
                                       w, ErrorKind::Config);
    if (view < 0 || view >= static_cast<int>(d.scene.cameras.size())) {
      throw Error(ErrorKind::Config, "view out of range");
    }
    camera = d.scene.cameras[static_cast<std::size_t>(view)];
    base.background_color = d.scene.background;
    const std::string model_dir = get_field_or<std::string>(cfg, "model", "", w, ErrorKind::Config);
    if (model_dir.empty()) {
      m.add_input(fs::path(data_dir) / "ground_truth.json");
      analytic = analytic_scene_from_json(
          read_json(fs::path(data_dir) / "ground_truth.json").at("scene"));
    } else {
      model.emplace(load_model(model_dir, m));
      if (model->coarse) throw Error(ErrorKind::Config, "bench needs a single-network model");
      mirrors = d.mirrors;
      t_near = d.scene.t_near;
      t_far = d.scene.t_far;
    }
  }
  write_manifest(out, m);

  RenderScene scene;
  if (analytic) {
    mirrors = analytic->surfaces();
    scene.field = &analytic->medium;
    scene.environment = analytic->environment;
    t_near = analytic->t_near;
    t_far = analytic->t_far;
  } else {
    scene.field = model->field.get();
  }
  scene.mirrors = mirrors;
  scene.t_near = t_near;
  scene.t_far = t_far;

  std::ofstream csv = open_out(out / "bench.csv");
  std::ofstream timing = open_out(out / "bench_timing.csv");
  csv << "budget,mode,n_dirs,k_samples,runs,evaluations_per_run,mirror_pixels,mean_variance,"
         "median_variance,fraction_not_worse_than_other\n";
  timing << "budget,mode,wall_seconds\n";
  for (const int budget : budgets) {
    std::vector<PixelVariance> results;
    for (const EstimatorMode mode : mode_list) {
      const IntegratorConfig ic = budget_config(base, mode, budget, k_samples);
      results.push_back(pixel_variance(camera, scene, ic, runs, seed));
    }
    for (std::size_t k = 0; k < results.size(); ++k) {
      const PixelVariance& r = results[k];
      std::vector<double> vals;
      for (std::size_t i = 0; i < r.variance.size(); ++i) {
        if (r.mirror_mask[i]) vals.push_back(r.variance[i]);
      }
      double mean = std::nan(""), median = std::nan("");
      if (!vals.empty()) {
        double s = 0;
        for (const double v : vals) s += v;
        mean = s / static_cast<double>(vals.size());
        std::sort(vals.begin(), vals.end());
        median = vals[vals.size() / 2];
      }
      double frac = std::nan("");
      if (results.size() == 2) frac = fraction_not_worse(r, results[1 - k]);
      csv << budget << ',' << modes[k] << ',' << budget / k_samples << ',' << k_samples << ','
          << runs << ',' << r.evaluations_per_run << ',' << vals.size() << ',' << num(mean) << ','
          << num(median) << ',' << num(frac) << '\n';
      timing << budget << ',' << modes[k] << ',' << num(r.wall_seconds) << '\n';
    }
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Radiance fields with traced mirror reflections"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mirrorfield 0.1.0");

  // generate
  Common gen;
  auto* g = app.add_subcommand("generate", "Render a synthetic dataset from a preset");
  add_common(g, gen, false);
  bool list = false;
  std::optional<std::string> preset;
  std::optional<int> n_train, n_test, width, height, spp;
  std::optional<double> radius;
  g->add_flag("--list", list, "List presets and exit");
  g->add_option("--preset", preset, "Preset name");
  g->add_option("--n-train", n_train);
  g->add_option("--n-test", n_test);
  g->add_option("--width", width);
  g->add_option("--height", height);
  g->add_option("--radius", radius, "Hemisphere camera radius (0 = preset)");
  g->add_option("--spp", spp, "Samples per pixel for rough mirrors");

  // triangulate
  Common tri;
  auto* t = app.add_subcommand("triangulate", "Mirror geometry from annotations, with a noise sweep");
  add_common(t, tri, true);
  std::optional<std::string> tri_scene, tri_ann;
  std::optional<std::vector<double>> noise;
  std::optional<int> trials;
  t->add_option("--scene", tri_scene, "scene.json");
  t->add_option("--annotations", tri_ann, "Annotation file (default: the scene's)");
  t->add_option("--noise", noise, "Noise levels in pixels")->delimiter(',');
  t->add_option("--trials", trials);

  // train
  Common tr;
  auto* r = app.add_subcommand("train", "Optimize a field on a dataset");
  add_common(r, tr, true);
  std::optional<std::string> tr_data;
  std::optional<int> iterations, batch, log_every, checkpoint_every;
  bool resume = false, no_reflections = false, twin = false;
  r->add_option("--data", tr_data, "Dataset directory");
  r->add_option("--iterations", iterations);
  r->add_option("--batch-rays", batch);
  r->add_option("--log-every", log_every);
  r->add_option("--checkpoint-every", checkpoint_every);
  r->add_flag("--resume", resume, "Continue from <out>/state.mfts");
  r->add_flag("--no-reflections", no_reflections, "Plain volume rendering (mirrors ignored)");
  r->add_flag("--twin-networks", twin, "Separate coarse network");

  // render
  Common re;
  auto* rn = app.add_subcommand("render", "Render views with a trained model");
  add_common(rn, re, true);
  std::optional<std::string> re_model, re_data, re_views;
  std::optional<double> alpha;
  rn->add_option("--model", re_model, "Training output directory");
  rn->add_option("--data", re_data, "Dataset directory (default: the training set)");
  rn->add_option("--views", re_views, "test, train, all, or comma-separated indices");
  rn->add_option("--alpha-override", alpha, "Mirror roughness used at render time");

  // eval
  Common ev;
  auto* e = app.add_subcommand("eval", "PSNR/SSIM of a model or images against a dataset");
  add_common(e, ev, true);
  std::optional<std::string> ev_data, ev_model, ev_pred, ev_views;
  e->add_option("--data", ev_data, "Dataset directory");
  e->add_option("--model", ev_model, "Training output directory");
  e->add_option("--predictions", ev_pred, "Directory of images named like the dataset's");
  e->add_option("--views", ev_views, "test, train, all, or comma-separated indices");

  // bench
  Common be;
  auto* b = app.add_subcommand("bench", "Dense vs sparse reflection estimator at equal budgets");
  add_common(b, be, true);
  std::optional<std::string> be_preset, be_data, be_model;
  std::optional<std::vector<int>> budgets;
  std::optional<std::vector<std::string>> modes;
  std::optional<int> runs, k_samples, be_width, be_height, be_view;
  b->add_option("--preset", be_preset);
  b->add_option("--data", be_data);
  b->add_option("--model", be_model);
  b->add_option("--view", be_view);
  b->add_option("--width", be_width);
  b->add_option("--height", be_height);
  b->add_option("--budgets", budgets)->delimiter(',');
  b->add_option("--modes", modes)->delimiter(',');
  b->add_option("--runs", runs);
  b->add_option("--k-samples", k_samples);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);
    std::cerr << "mirrorfield: " << err.what() << '\n';
    return 2;
  }

  auto views_json = [](const std::string& s) -> Json {
    if (s == "test" || s == "train" || s == "all") return s;
    Json list = Json::array();
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        list.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw Error(ErrorKind::Config, "bad view index '" + item + "'");
      }
    }
    return list;
  };

  try {
    const Common* common = nullptr;
    if (g->parsed()) {
      if (list) {
        for (const std::string& name : preset_names()) {
          std::cout << name << '\t' << make_preset(name).description << '\n';
        }
        return 0;
      }
      flag_into(gen.flags, "preset", preset);
      flag_into(gen.flags, "n_train", n_train);
      flag_into(gen.flags, "n_test", n_test);
      flag_into(gen.flags, "width", width);
      flag_into(gen.flags, "height", height);
      flag_into(gen.flags, "radius", radius);
      flag_into(gen.flags, "spp", spp);
      common = &gen;
    } else if (t->parsed()) {
      flag_into(tri.flags, "scene", tri_scene);
      flag_into(tri.flags, "annotations", tri_ann);
      flag_into(tri.flags, "noise_px", noise);
      flag_into(tri.flags, "trials", trials);
      common = &tri;
    } else if (r->parsed()) {
      flag_into(tr.flags, "data", tr_data);
      Json train_flags = Json::object();
      flag_into(train_flags, "iterations", iterations);
      flag_into(train_flags, "batch_rays", batch);
      flag_into(train_flags, "log_every", log_every);
      flag_into(train_flags, "checkpoint_every", checkpoint_every);
      if (twin) train_flags["twin_networks"] = true;
      if (!train_flags.empty()) tr.flags["train"] = train_flags;
      if (no_reflections) tr.flags["integrator"] = {{"trace_reflections", false}};
      if (resume) tr.flags["resume"] = true;
      common = &tr;
    } else if (rn->parsed()) {
      flag_into(re.flags, "model", re_model);
      flag_into(re.flags, "data", re_data);
      if (re_views) re.flags["views"] = views_json(*re_views);
      flag_into(re.flags, "alpha_override", alpha);
      common = &re;
    } else if (e->parsed()) {
      flag_into(ev.flags, "data", ev_data);
      flag_into(ev.flags, "model", ev_model);
      flag_into(ev.flags, "predictions", ev_pred);
      if (ev_views) ev.flags["views"] = views_json(*ev_views);
      common = &ev;
    } else {
      flag_into(be.flags, "preset", be_preset);
      flag_into(be.flags, "data", be_data);
      flag_into(be.flags, "model", be_model);
      flag_into(be.flags, "view", be_view);
      flag_into(be.flags, "width", be_width);
      flag_into(be.flags, "height", be_height);
      flag_into(be.flags, "budgets", budgets);
      flag_into(be.flags, "modes", modes);
      flag_into(be.flags, "runs", runs);
      flag_into(be.flags, "k_samples", k_samples);
      common = &be;
    }
    if (common->threads > 0) omp_set_num_threads(common->threads);
    const fs::path out = common->out;

    if (g->parsed()) {
      if (out.empty()) throw Error(ErrorKind::Config, "generate needs --out");
      return cmd_generate(resolve({{"preset", "mirror-box"}}, gen), out);
    }
    if (t->parsed()) {
      return cmd_triangulate(
          resolve({{"noise_px", {0.0, 2.0, 5.0, 10.0, 25.0}}, {"trials", 50}}, tri), out);
    }
    if (r->parsed()) return cmd_train(resolve(Json::object(), tr), out);
    if (rn->parsed()) return cmd_render(resolve({{"views", "test"}}, re), out);
    if (e->parsed()) return cmd_eval(resolve({{"views", "test"}}, ev), out);
    return cmd_bench(resolve({{"budgets", {64, 128, 256}},
                              {"modes", {"sparse", "dense"}},
                              {"runs", 50},
                              {"k_samples", 32}},
                             be),
                     out);
  } catch (const Error& err) {
    std::cerr << "mirrorfield: " << err.what() << '\n';
    return exit_code(err.kind());
  } catch (const nlohmann::json::exception& err) {
    std::cerr << "mirrorfield: DataError: " << err.what() << '\n';
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "mirrorfield: " << err.what() << '\n';
    return 1;
  }
}

}  // namespace mirrorfield::cli
