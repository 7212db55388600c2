#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "relopt/energy.hpp"
#include "relopt/error.hpp"
#include "relopt/optimizer.hpp"
#include "relopt/relations.hpp"
#include "relopt/scene.hpp"
#include "relopt/synth.hpp"

namespace relopt::io {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

enum class Mode { Strict, Lenient };

struct GroundTruthBox {
  OrientedBox box;
  int category = 0;

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

/// Everything a scene file holds. `extras` keeps unknown top-level fields
/// and `object_extras` unknown per-object fields when read leniently.
struct SceneDocument {
  Scene scene;
  std::optional<RelationSet> relations;
  std::optional<std::vector<GroundTruthBox>> ground_truth;
  json extras = json::object();
  std::vector<json> object_extras;
};

// ---------------------------------------------------------------------------
// Reading with field paths

class Node {
 public:
  Node(const json& j, std::string path, Mode mode) : j_(j), path_(std::move(path)), mode_(mode) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }

  [[noreturn]] void fail(const std::string& what) const { throw DataError(path_ + ": " + what); }

  Node at(const std::string& key) const {
    if (!j_.is_object()) fail("expected an object");
    const auto it = j_.find(key);
    if (it == j_.end()) throw DataError(child(key) + ": missing field");
    return Node(*it, child(key), mode_);
  }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  Node at(std::size_t k) const {
    if (!j_.is_array()) fail("expected an array");
    if (k >= j_.size()) fail("index " + std::to_string(k) + " out of range");
    return Node(j_[k], path_ + "[" + std::to_string(k) + "]", mode_);
  }
  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }
  std::size_t size(std::size_t expected) const {
    const std::size_t n = size();
    if (n != expected)
      fail("expected " + std::to_string(expected) + " entries, got " + std::to_string(n));
    return n;
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("not finite");
    return v;
  }
  int integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<int>();
  }
  bool boolean() const {
    if (!j_.is_boolean()) fail("expected a boolean");
    return j_.get<bool>();
  }
  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  /// Rejects keys outside `known` in strict mode; returns the unknown ones.
  json check_keys(std::initializer_list<const char*> known) const {
    if (!j_.is_object()) fail("expected an object");
    std::set<std::string> ok(known.begin(), known.end());
    json extra = json::object();
    for (const auto& [k, v] : j_.items()) {
      if (ok.count(k)) continue;
      if (mode_ == Mode::Strict) throw DataError(child(k) + ": unknown field");
      extra[k] = v;
    }
    return extra;
  }

 private:
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  Mode mode_;
};

inline Vec3d read_vec3(const Node& n) {
  n.size(3);
  return {n.at(std::size_t{0}).number(), n.at(std::size_t{1}).number(), n.at(std::size_t{2}).number()};
}

inline json write_vec3(const Vec3d& v) { return json::array({v.x, v.y, v.z}); }

// ---------------------------------------------------------------------------
// Pieces

inline json to_json(const PoseParams& p) {
  return {{"delta_lon", p.delta_lon}, {"delta_lat", p.delta_lat}, {"dist", p.dist},
          {"size", write_vec3(p.size)}, {"theta", p.theta}};
}

inline PoseParams read_pose(const Node& n) {
  n.check_keys({"delta_lon", "delta_lat", "dist", "size", "theta"});
  PoseParams p;
  p.delta_lon = n.at("delta_lon").number();
  p.delta_lat = n.at("delta_lat").number();
  p.dist = n.at("dist").number();
  if (!(p.dist > 0.0)) n.at("dist").fail("must be > 0");
  p.size = read_vec3(n.at("size"));
  if (!(p.size.x > 0.0 && p.size.y > 0.0 && p.size.z > 0.0)) n.at("size").fail("must be > 0");
  p.theta = n.at("theta").number();
  return p;
}

inline json to_json(const BFoV& b) {
  return {{"lon", b.center.lon}, {"lat", b.center.lat}, {"hfov", b.hfov},
          {"vfov", b.vfov},      {"score", b.score},    {"category", b.category}};
}

inline BFoV read_bfov(const Node& n) {
  n.check_keys({"lon", "lat", "hfov", "vfov", "score", "category"});
  BFoV b;
  b.center.lon = n.at("lon").number();
  b.center.lat = n.at("lat").number();
  b.hfov = n.at("hfov").number();
  b.vfov = n.at("vfov").number();
  if (!(b.hfov > 0.0)) n.at("hfov").fail("must be > 0");
  if (!(b.vfov > 0.0)) n.at("vfov").fail("must be > 0");
  b.score = n.at("score").number();
  if (b.score < 0.0 || b.score > 1.0) n.at("score").fail("must be in [0, 1]");
  b.category = n.at("category").integer();
  return b;
}

inline json to_json(const OrientedBox& b) {
  return {{"center", write_vec3(b.center)}, {"size", write_vec3(b.size)}, {"yaw", b.yaw}};
}

inline OrientedBox read_box(const Node& n, bool with_category = false) {
  if (with_category)
    n.check_keys({"center", "size", "yaw", "category"});
  else
    n.check_keys({"center", "size", "yaw"});
  OrientedBox b;
  b.center = read_vec3(n.at("center"));
  b.size = read_vec3(n.at("size"));
  if (!(b.size.x > 0.0 && b.size.y > 0.0 && b.size.z > 0.0)) n.at("size").fail("must be > 0");
  b.yaw = n.at("yaw").number();
  return b;
}

inline json to_json(const Label& l) { return {{"value", l.value}, {"confidence", l.confidence}}; }
inline json to_json(const BinLabel& l) { return {{"bin", l.bin}, {"confidence", l.confidence}}; }

inline double read_confidence(const Node& n) {
  const double c = n.number();
  if (c < 0.0 || c > 1.0) n.fail("must be in [0, 1]");
  return c;
}

inline Label read_label(const Node& n) {
  n.check_keys({"value", "confidence"});
  return {n.at("value").boolean(), read_confidence(n.at("confidence"))};
}

inline BinLabel read_bin_label(const Node& n) {
  n.check_keys({"bin", "confidence"});
  const int bin = n.at("bin").integer();
  if (bin < 0 || bin >= kRotationBins) n.at("bin").fail("must be in [0, 8)");
  return {bin, read_confidence(n.at("confidence"))};
}

template <class T>
json grid_to_json(const Grid<T>& g) {
  json rows = json::array();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < g.cols(); ++c) row.push_back(to_json(g(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class T, class F>
Grid<T> read_grid(const Node& n, std::size_t rows, std::size_t cols, F read) {
  Grid<T> g(rows, cols);
  n.size(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const Node row = n.at(r);
    row.size(cols);
    for (std::size_t c = 0; c < cols; ++c) g(r, c) = read(row.at(c));
  }
  return g;
}

inline json to_json(const RelationSet& r) {
  json floor = json::array(), ceil = json::array();
  for (const auto& l : r.attach_floor) floor.push_back(to_json(l));
  for (const auto& l : r.attach_ceiling) ceil.push_back(to_json(l));
  return {{"num_objects", r.num_objects},
          {"num_walls", r.num_walls},
          {"rot_bin", grid_to_json(r.rot_bin)},
          {"attach_obj", grid_to_json(r.attach_obj)},
          {"attach_floor", floor},
          {"attach_ceiling", ceil},
          {"in_room", r.in_room},
          {"farther", grid_to_json(r.farther)}};
}

inline RelationSet read_relations(const Node& n) {
  n.check_keys({"num_objects", "num_walls", "rot_bin", "attach_obj", "attach_floor",
                "attach_ceiling", "in_room", "farther"});
  const int ni = n.at("num_objects").integer();
  const int mi = n.at("num_walls").integer();
  if (ni < 0) n.at("num_objects").fail("must be >= 0");
  if (mi < 0) n.at("num_walls").fail("must be >= 0");
  const auto nn = static_cast<std::size_t>(ni), m = static_cast<std::size_t>(mi);
  RelationSet r(nn, m);
  r.rot_bin = read_grid<BinLabel>(n.at("rot_bin"), nn, nn + m, read_bin_label);
  r.attach_obj = read_grid<Label>(n.at("attach_obj"), nn, nn + m, read_label);
  r.farther = read_grid<Label>(n.at("farther"), nn, nn, read_label);
  const Node f = n.at("attach_floor"), c = n.at("attach_ceiling"), in = n.at("in_room");
  f.size(nn);
  c.size(nn);
  in.size(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    r.attach_floor[i] = read_label(f.at(i));
    r.attach_ceiling[i] = read_label(c.at(i));
    r.in_room[i] = read_confidence(in.at(i));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Scene documents

inline json to_json(const SceneDocument& doc) {
  const Scene& s = doc.scene;
  json j = doc.extras.is_object() ? doc.extras : json::object();
  j["version"] = kFormatVersion;
  j["camera"] = {{"height_above_floor", s.camera().height_above_floor}};
  json poly = json::array();
  for (const auto& p : s.layout().floor_polygon) poly.push_back(json::array({p.x, p.z}));
  j["layout"] = {{"floor_polygon", poly},
                 {"floor_y", s.layout().floor_y},
                 {"ceiling_y", s.layout().ceiling_y},
                 {"wall_thickness", s.layout().wall_thickness}};
  json objs = json::array();
  for (std::size_t i = 0; i < s.objects().size(); ++i) {
    const auto& o = s.objects()[i];
    json oj = i < doc.object_extras.size() && doc.object_extras[i].is_object() ? doc.object_extras[i]
                                                                              : json::object();
    oj["id"] = o.id;
    oj["category"] = o.category;
    oj["detection"] = to_json(o.detection);
    oj["pose"] = to_json(o.pose);
    oj["initial_pose"] = to_json(o.initial_pose());
    oj["in_room_likelihood"] = o.in_room_likelihood;
    objs.push_back(std::move(oj));
  }
  j["objects"] = std::move(objs);
  if (doc.relations) j["relations"] = to_json(*doc.relations);
  if (doc.ground_truth) {
    json gt = json::array();
    for (const auto& g : *doc.ground_truth) {
      json b = to_json(g.box);
      b["category"] = g.category;
      gt.push_back(std::move(b));
    }
    j["ground_truth"] = std::move(gt);
  }
  return j;
}

inline SceneDocument scene_from_json(const json& j, Mode mode = Mode::Strict) {
  const Node root(j, "", mode);
  SceneDocument doc;
  doc.extras = root.check_keys(
      {"version", "camera", "layout", "objects", "relations", "ground_truth"});
  const int version = root.at("version").integer();
  if (version != kFormatVersion)
    root.at("version").fail("unsupported version " + std::to_string(version));

  const Node cam = root.at("camera");
  cam.check_keys({"height_above_floor"});
  CameraFrame camera{cam.at("height_above_floor").number()};
  if (!(camera.height_above_floor > 0.0)) cam.at("height_above_floor").fail("must be > 0");

  const Node lay = root.at("layout");
  lay.check_keys({"floor_polygon", "floor_y", "ceiling_y", "wall_thickness"});
  std::vector<Vec2d> poly;
  const Node pn = lay.at("floor_polygon");
  for (std::size_t k = 0; k < pn.size(); ++k) {
    const Node v = pn.at(k);
    v.size(2);
    poly.push_back({v.at(std::size_t{0}).number(), v.at(std::size_t{1}).number()});
  }
  LayoutShell layout;
  try {
    layout = make_layout(poly, lay.at("floor_y").number(), lay.at("ceiling_y").number(),
                         lay.at("wall_thickness").number());
  } catch (const DataError& e) {
    lay.fail(e.what());
  }
  // the saved polygon is already canonical; keep it verbatim so saves are stable
  std::vector<ObjectInstance> objects;
  const Node on = root.at("objects");
  for (std::size_t i = 0; i < on.size(); ++i) {
    const Node o = on.at(i);
    doc.object_extras.push_back(
        o.check_keys({"id", "category", "detection", "pose", "initial_pose", "in_room_likelihood"}));
    const double lin = read_confidence(o.at("in_room_likelihood"));
    objects.emplace_back(o.at("id").integer(), o.at("category").integer(),
                         read_bfov(o.at("detection")), read_pose(o.at("pose")),
                         read_pose(o.at("initial_pose")), lin);
  }
  try {
    doc.scene = Scene(camera, layout, std::move(objects));
  } catch (const DataError& e) {
    root.at("objects").fail(e.what());
  }
  if (root.has("relations")) {
    doc.relations = read_relations(root.at("relations"));
    try {
      doc.relations->check_covers(doc.scene.objects().size(), doc.scene.walls().size());
    } catch (const DataError& e) {
      root.at("relations").fail(e.what());
    }
  }
  if (root.has("ground_truth")) {
    const Node g = root.at("ground_truth");
    std::vector<GroundTruthBox> gt;
    for (std::size_t k = 0; k < g.size(); ++k)
      gt.push_back({read_box(g.at(k), true), g.at(k).at("category").integer()});
    doc.ground_truth = std::move(gt);
  }
  bool all_empty = true;
  for (const auto& e : doc.object_extras) all_empty = all_empty && e.empty();
  if (all_empty) doc.object_extras.clear();
  return doc;
}

/// Canonical text: sorted keys, two-space indent, shortest round-trip doubles.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(origin + ": malformed JSON: " + e.what());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

inline SceneDocument load_document(const std::filesystem::path& path, Mode mode = Mode::Strict) {
  const json j = parse_text(read_file(path), path.string());
  try {
    return scene_from_json(j, mode);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void save_document(const SceneDocument& doc, const std::filesystem::path& path) {
  write_file(path, dump(to_json(doc)));
}

inline Scene load_scene(const std::filesystem::path& path, Mode mode = Mode::Strict) {
  return load_document(path, mode).scene;
}

inline void save_scene(const Scene& scene, const std::filesystem::path& path) {
  SceneDocument doc;
  doc.scene = scene;
  save_document(doc, path);
}

inline SceneDocument document_of(const GeneratedScene& g) {
  SceneDocument doc;
  doc.scene = g.scene;
  doc.relations = g.relations;
  std::vector<GroundTruthBox> gt;
  for (std::size_t i = 0; i < g.ground_truth.size(); ++i)
    gt.push_back({g.ground_truth[i], g.scene.objects()[i].category});
  doc.ground_truth = std::move(gt);
  return doc;
}

// ---------------------------------------------------------------------------
// Weights and run configuration

/// Preset name or a config file path. A file may name a preset under "preset"
/// and override individual terms under "weights".
inline TermWeights read_weights(const json& j, const std::string& origin) {
  const Node root(j, origin, Mode::Strict);
  root.check_keys({"preset", "weights"});
  TermWeights w;
  if (root.has("preset")) {
    const auto name = root.at("preset").string();
    const auto p = weights_preset(name);
    if (!p) root.at("preset").fail("unknown preset '" + name + "'");
    w = *p;
  }
  if (root.has("weights")) {
    const Node wn = root.at("weights");
    if (!wn.raw().is_object()) wn.fail("expected an object");
    for (const auto& [k, v] : wn.raw().items()) {
      const auto it = std::find(kTermNames.begin(), kTermNames.end(), k);
      if (it == kTermNames.end()) wn.at(k).fail("unknown term");
      const double x = wn.at(k).number();
      if (x < 0.0) wn.at(k).fail("must be >= 0");
      w[static_cast<Term>(it - kTermNames.begin())] = x;
    }
  }
  return w;
}

inline TermWeights resolve_weights(const std::string& name_or_path) {
  if (const auto p = weights_preset(name_or_path)) return *p;
  const std::filesystem::path path(name_or_path);
  return read_weights(parse_text(read_file(path), path.string()), path.string());
}

inline json to_json(const TermWeights& w) {
  json ws = json::object();
  for (std::size_t t = 0; t < kTermCount; ++t) ws[std::string(kTermNames[t])] = w[static_cast<Term>(t)];
  return {{"weights", ws}};
}

/// Generator settings; absent fields keep their defaults.
inline GenConfig read_gen_config(const json& j, const std::string& origin) {
  const Node n(j, origin, Mode::Strict);
  n.check_keys({"shape", "l_shape_probability", "room_min", "room_max", "height_min", "height_max",
                "min_objects", "max_objects", "wall_attach_probability", "adjacency_probability",
                "diagonal_yaw_probability", "camera_height", "camera_clearance", "camera_grid",
                "rotate_room", "max_attempts", "relation_tolerance"});
  GenConfig c;
  auto num = [&](const char* k, double& dst) {
    if (n.has(k)) dst = n.at(k).number();
  };
  auto integer = [&](const char* k, int& dst) {
    if (n.has(k)) dst = n.at(k).integer();
  };
  if (n.has("shape")) {
    const auto s = n.at("shape").string();
    if (s == "rectangle")
      c.shape = RoomShape::Rectangle;
    else if (s == "l-shape")
      c.shape = RoomShape::LShape;
    else if (s == "mixed")
      c.shape = RoomShape::Mixed;
    else
      n.at("shape").fail("expected rectangle, l-shape or mixed");
  }
  num("l_shape_probability", c.l_shape_probability);
  num("room_min", c.room_min);
  num("room_max", c.room_max);
  num("height_min", c.height_min);
  num("height_max", c.height_max);
  integer("min_objects", c.min_objects);
  integer("max_objects", c.max_objects);
  num("wall_attach_probability", c.wall_attach_probability);
  num("adjacency_probability", c.adjacency_probability);
  num("diagonal_yaw_probability", c.diagonal_yaw_probability);
  num("camera_height", c.camera_height);
  num("camera_clearance", c.camera_clearance);
  num("camera_grid", c.camera_grid);
  if (n.has("rotate_room")) c.rotate_room = n.at("rotate_room").boolean();
  integer("max_attempts", c.max_attempts);
  num("relation_tolerance", c.relation_tolerance);
  try {
    c.validate();
  } catch (const DataError& e) {
    n.fail(e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Trajectories

inline json to_json(const Trajectory& t) {
  json frames = json::array();
  for (const auto& f : t.frames) {
    json poses = json::array();
    for (const auto& p : f.poses) poses.push_back(to_json(p));
    frames.push_back({{"step", f.step}, {"energy", f.energy}, {"poses", poses}});
  }
  SceneDocument doc;
  doc.scene = t.scene;
  return {{"version", kFormatVersion}, {"scene", to_json(doc)}, {"frames", frames}};
}

inline Trajectory trajectory_from_json(const json& j, Mode mode = Mode::Strict) {
  const Node root(j, "", mode);
  root.check_keys({"version", "scene", "frames"});
  if (root.at("version").integer() != kFormatVersion) root.at("version").fail("unsupported version");
  Trajectory t;
  try {
    t.scene = scene_from_json(root.at("scene").raw(), mode).scene;
  } catch (const DataError& e) {
    throw DataError(std::string("scene.") + e.what());
  }
  const Node fr = root.at("frames");
  const std::size_t n = t.scene.objects().size();
  for (std::size_t k = 0; k < fr.size(); ++k) {
    const Node f = fr.at(k);
    f.check_keys({"step", "energy", "poses"});
    TrajectoryFrame frame;
    frame.step = f.at("step").integer();
    frame.energy = f.at("energy").number();
    const Node ps = f.at("poses");
    ps.size(n);
    for (std::size_t i = 0; i < n; ++i) frame.poses.push_back(read_pose(ps.at(i)));
    t.frames.push_back(std::move(frame));
  }
  return t;
}

inline Trajectory load_trajectory(const std::filesystem::path& path, Mode mode = Mode::Strict) {
  const json j = parse_text(read_file(path), path.string());
  try {
    return trajectory_from_json(j, mode);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void save_trajectory(const Trajectory& t, const std::filesystem::path& path) {
  write_file(path, dump(to_json(t)));
}

}  // namespace relopt::io
