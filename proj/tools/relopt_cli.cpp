#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "relopt/relopt.hpp"

namespace fs = std::filesystem;
using namespace relopt;
using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::uint64_t seed = 0;
};

struct GenerateArgs {
  std::string config, out;
};

struct PerturbArgs {
  std::string in, out;
  double sigma_center = NoiseSpec{}.sigma_center;
  double sigma_yaw = NoiseSpec{}.sigma_yaw;
  double sigma_size = NoiseSpec{}.sigma_size;
  bool keep_detections = false;
};

struct ExtractArgs {
  std::string in, out;
  double tolerance = 0.1;
};

struct OptimizeArgs {
  std::string in, out, weights = "igibson", trajectory_out, policy = "final";
  double lr = 1.0, momentum = 0.9, tolerance = 0.1;
  int steps = 100, stride = 1, jobs = 1;
  bool extract = false, plateau = false, pairs_twice = false, lenient = false;
  GroupScales scales;
};

struct EvaluateArgs {
  std::vector<std::string> inputs;
  std::string metric = "map", out;
  double iou_threshold = 0.15, tolerance = 0.1;
  int samples = 10000;
};

struct ExportArgs {
  std::string trajectory, out;
  int stride = 1;
};

void emit(const json& j, const std::string& out) {
  if (out.empty())
    std::cout << io::dump(j);
  else
    io::write_file(out, io::dump(j));
}

int run_generate(const GenerateArgs& a, const Common& c) {
  GenConfig cfg;
  if (!a.config.empty()) cfg = io::read_gen_config(io::parse_text(io::read_file(a.config), a.config), a.config);
  cfg.seed = c.seed;
  const auto g = generate_scene(cfg);
  io::save_document(io::document_of(g), a.out);
  std::cerr << "generated " << g.scene.objects().size() << " objects, " << g.scene.walls().size()
            << " walls -> " << a.out << "\n";
  return kExitOk;
}

int run_perturb(const PerturbArgs& a, const Common& c) {
  auto doc = io::load_document(a.in, io::Mode::Lenient);
  const NoiseSpec noise{a.sigma_center, a.sigma_yaw, a.sigma_size};
  doc.scene = perturb_scene(doc.scene, noise, c.seed,
                            a.keep_detections ? DetectionMode::GroundTruth : DetectionMode::Perturbed);
  io::save_document(doc, a.out);
  return kExitOk;
}

int run_extract(const ExtractArgs& a, const Common&) {
  auto doc = io::load_document(a.in, io::Mode::Lenient);
  doc.relations = extract_relations(doc.scene, a.tolerance);
  doc.scene = apply_in_room(doc.scene, *doc.relations);
  io::save_document(doc, a.out);
  return kExitOk;
}

OptimConfig optim_config(const OptimizeArgs& a) {
  OptimConfig oc;
  oc.learning_rate = a.lr;
  oc.steps = a.steps;
  oc.momentum = a.momentum;
  oc.scales = a.scales;
  oc.trajectory_stride = a.stride;
  oc.policy = a.policy == "best" ? ResolvePolicy::BestEnergy : ResolvePolicy::Final;
  oc.plateau_stop = a.plateau;
  oc.validate();
  return oc;
}

std::string optimize_one(const OptimizeArgs& a, const EnergyConfig& ec, const OptimConfig& oc,
                         const fs::path& in, const fs::path& out, const fs::path& traj_out) {
  auto doc = io::load_document(in, a.lenient ? io::Mode::Lenient : io::Mode::Strict);
  if (!doc.relations) {
    if (!a.extract)
      throw DataError(in.string() + ": no relations in the scene file; pass --extract to derive them from the current poses");
    doc.relations = extract_relations(doc.scene, a.tolerance);
  }
  const auto res = optimize(doc.scene, *doc.relations, ec, oc);
  doc.scene = res.scene;
  io::save_document(doc, out);
  if (!traj_out.empty()) io::save_trajectory(res.trajectory, traj_out);
  const auto& f = res.trajectory.frames;
  char line[256];
  std::snprintf(line, sizeof line, "%s: energy %.6g -> %.6g in %d steps", in.string().c_str(),
                f.front().energy, f.back().energy, f.back().step);
  return line;
}

int run_optimize(const OptimizeArgs& a, const Common&) {
  EnergyConfig ec;
  ec.weights = io::resolve_weights(a.weights);
  ec.count_pairs_twice = a.pairs_twice;
  const OptimConfig oc = optim_config(a);

  if (!fs::is_directory(a.in)) {
    std::cerr << optimize_one(a, ec, oc, a.in, a.out, a.trajectory_out) << "\n";
    return kExitOk;
  }
  // directory mode: every *.json scene, written under the same name
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.in))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  fs::create_directories(a.out);
  if (!a.trajectory_out.empty()) fs::create_directories(a.trajectory_out);

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::vector<std::string> lines(files.size());
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < files.size();) {
      try {
        const fs::path traj =
            a.trajectory_out.empty() ? fs::path() : fs::path(a.trajectory_out) / files[k].filename();
        lines[k] = optimize_one(a, ec, oc, files[k], fs::path(a.out) / files[k].filename(), traj);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int jobs = std::max(1, std::min<int>(a.jobs, static_cast<int>(files.size())));
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& l : lines)
    if (!l.empty()) std::cerr << l << "\n";
  if (failure) std::rethrow_exception(failure);
  return kExitOk;
}

std::vector<std::pair<OrientedBox, int>> gt_of(const io::SceneDocument& d, const std::string& path) {
  if (!d.ground_truth) throw DataError(path + ": ground_truth block required for this metric");
  std::vector<std::pair<OrientedBox, int>> out;
  for (const auto& g : *d.ground_truth) out.emplace_back(g.box, g.category);
  return out;
}

int run_evaluate(const EvaluateArgs& a, const Common&) {
  std::vector<io::SceneDocument> docs;
  for (const auto& p : a.inputs) docs.push_back(io::load_document(p, io::Mode::Lenient));
  json out;
  out["metric"] = a.metric;
  out["scenes"] = docs.size();
  if (a.metric == "map") {
    DetectionResult res;
    for (std::size_t k = 0; k < docs.size(); ++k) {
      DetectionResult::SceneEntry e;
      for (const auto& o : docs[k].scene.objects())
        e.predictions.push_back({o.box(), o.category, o.detection.score});
      for (const auto& [b, c] : gt_of(docs[k], a.inputs[k])) e.ground_truth.push_back({b, c});
      res.scenes.push_back(std::move(e));
    }
    const auto rep = mean_average_precision(res, a.iou_threshold);
    out["iou_threshold"] = a.iou_threshold;
    out["mean"] = rep.mean;
    json per = json::object();
    for (const auto& [c, ap] : rep.per_category) per[std::to_string(c)] = ap;
    out["per_category"] = per;
  } else if (a.metric == "collisions") {
    std::vector<Scene> scenes;
    for (const auto& d : docs) scenes.push_back(d.scene);
    const auto s = collision_stats(scenes, a.tolerance);
    out["tolerance"] = a.tolerance;
    out["collision_times"] = s.collision_times;
    out["objects_with_object"] = s.objects_with_object;
    out["objects_with_ceiling"] = s.objects_with_ceiling;
    out["objects_with_floor"] = s.objects_with_floor;
    out["objects_with_wall"] = s.objects_with_wall;
  } else {
    double sum = 0.0;
    json per_scene = json::array();
    for (std::size_t k = 0; k < docs.size(); ++k) {
      std::vector<OrientedBox> gb;
      std::vector<int> gc;
      for (const auto& [b, c] : gt_of(docs[k], a.inputs[k])) {
        gb.push_back(b);
        gc.push_back(c);
      }
      const auto pb = docs[k].scene.object_boxes();
      std::vector<int> pc;
      for (const auto& o : docs[k].scene.objects()) pc.push_back(o.category);
      const auto r = semantic_sphere_iou(pb, pc, gb, gc, docs[k].scene.layout(), a.samples);
      sum += r.mean;
      per_scene.push_back(r.mean);
    }
    out["samples"] = a.samples;
    out["per_scene"] = per_scene;
    out["mean"] = docs.empty() ? 0.0 : sum / static_cast<double>(docs.size());
  }
  emit(out, a.out);
  return kExitOk;
}

int run_export(const ExportArgs& a, const Common&) {
  const auto traj = io::load_trajectory(a.trajectory, io::Mode::Lenient);
  if (traj.frames.empty()) throw DataError(a.trajectory + ": trajectory has no frames");
  fs::create_directories(a.out);
  int written = 0;
  for (std::size_t k = 0; k < traj.frames.size(); ++k) {
    const auto& f = traj.frames[k];
    if (f.step % a.stride != 0 && k + 1 != traj.frames.size()) continue;
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d", f.step);
    const Scene s = traj.scene.with_poses(f.poses);
    io::save_scene(s, fs::path(a.out) / (std::string(name) + ".json"));
    io::write_file(fs::path(a.out) / (std::string(name) + ".svg"), topdown_svg(s));
    ++written;
  }
  std::cerr << "wrote " << written << " frames to " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relation-based refinement of indoor scene cuboids"};
  app.require_subcommand(1);
  Common common;
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
  };

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Synthesize a room with furniture, relations and ground truth");
  add_seed(g);
  g->add_option("--config", gen.config, "Generator config (JSON)")->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output scene file")->required();

  PerturbArgs per;
  auto* p = app.add_subcommand("perturb", "Add Gaussian noise to object poses");
  add_seed(p);
  p->add_option("--in", per.in, "Input scene file")->required()->check(CLI::ExistingFile);
  p->add_option("--out", per.out, "Output scene file")->required();
  p->add_option("--sigma-center", per.sigma_center, "Center noise (m)")->capture_default_str()->check(CLI::NonNegativeNumber);
  p->add_option("--sigma-yaw", per.sigma_yaw, "Yaw noise (rad)")->capture_default_str()->check(CLI::NonNegativeNumber);
  p->add_option("--sigma-size", per.sigma_size, "Log-size noise")->capture_default_str()->check(CLI::NonNegativeNumber);
  p->add_flag("--keep-detections", per.keep_detections, "Keep the input detections");

  ExtractArgs ex;
  auto* e = app.add_subcommand("extract-relations", "Derive relation labels from the current poses");
  add_seed(e);
  e->add_option("--in", ex.in, "Input scene file")->required()->check(CLI::ExistingFile);
  e->add_option("--out", ex.out, "Output scene file")->required();
  e->add_option("--tolerance", ex.tolerance, "Contact tolerance (m)")->capture_default_str()->check(CLI::NonNegativeNumber);

  OptimizeArgs opt;
  auto* o = app.add_subcommand("optimize", "Refine object poses by gradient descent");
  add_seed(o);
  o->add_option("--in", opt.in, "Input scene file or directory")->required()->check(CLI::ExistingPath);
  o->add_option("--out", opt.out, "Output scene file or directory")->required();
  o->add_option("--weights", opt.weights, "Preset (igibson, structured3d) or config path")->capture_default_str();
  o->add_option("--lr", opt.lr, "Learning rate")->capture_default_str();
  o->add_option("--steps", opt.steps, "Number of steps")->capture_default_str();
  o->add_option("--momentum", opt.momentum, "Momentum")->capture_default_str();
  o->add_option("--policy", opt.policy, "Returned snapshot")->capture_default_str()->check(CLI::IsMember({"final", "best"}));
  o->add_option("--trajectory-out", opt.trajectory_out, "Trajectory file (or directory)");
  o->add_option("--stride", opt.stride, "Trajectory stride")->capture_default_str();
  o->add_option("--scale-offset", opt.scales.offset, "Step scale of the angular offsets")->capture_default_str();
  o->add_option("--scale-dist", opt.scales.dist, "Step scale of the distance")->capture_default_str();
  o->add_option("--scale-size", opt.scales.size, "Step scale of the size")->capture_default_str();
  o->add_option("--scale-theta", opt.scales.theta, "Step scale of the yaw")->capture_default_str();
  o->add_flag("--extract", opt.extract, "Extract relations when the file has none");
  o->add_option("--tolerance", opt.tolerance, "Contact tolerance for --extract (m)")->capture_default_str();
  o->add_flag("--plateau-stop", opt.plateau, "Stop when the energy plateaus");
  o->add_flag("--count-pairs-twice", opt.pairs_twice, "Sum object pairs over both orders");
  o->add_flag("--lenient", opt.lenient, "Accept unknown fields");
  o->add_option("--jobs", opt.jobs, "Parallel scenes in directory mode")->capture_default_str()->check(CLI::PositiveNumber);

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "Compute metrics over scene files");
  add_seed(v);
  v->add_option("inputs", ev.inputs, "Scene files")->required()->check(CLI::ExistingFile);
  v->add_option("--metric", ev.metric, "Metric")->capture_default_str()->check(CLI::IsMember({"map", "collisions", "sphere-iou"}));
  v->add_option("--iou-threshold", ev.iou_threshold, "3D IoU match threshold")->capture_default_str();
  v->add_option("--tolerance", ev.tolerance, "Collision tolerance (m)")->capture_default_str();
  v->add_option("--samples", ev.samples, "Sphere samples")->capture_default_str()->check(CLI::PositiveNumber);
  v->add_option("--out", ev.out, "Write the report here instead of stdout");

  ExportArgs exp;
  auto* x = app.add_subcommand("export-frames", "Write trajectory snapshots as scene files and SVG drawings");
  add_seed(x);
  x->add_option("--trajectory", exp.trajectory, "Trajectory file")->required()->check(CLI::ExistingFile);
  x->add_option("--out", exp.out, "Output directory")->required();
  x->add_option("--stride", exp.stride, "Frame stride")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) return run_generate(gen, common);
    if (*p) return run_perturb(per, common);
    if (*e) return run_extract(ex, common);
    if (*o) return run_optimize(opt, common);
    if (*v) return run_evaluate(ev, common);
    if (*x) return run_export(exp, common);
  } catch (const NumericalError& err) {
    std::cerr << "numerical error: " << err.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  } catch (const json::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
