#include "mpa/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mpa {

using json = nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << data;
}

json require(const json& j, const char* key, const char* ctx) {
  if (!j.contains(key))
    throw std::runtime_error(std::string(ctx) + ": missing field '" + key + "'");
  return j.at(key);
}

json vec2_list(const std::vector<Vec2>& pts) {
  json out = json::array();
  for (const Vec2& p : pts) out.push_back({p.x, p.y});
  return out;
}

std::vector<Vec2> vec2_list_from(const json& j) {
  std::vector<Vec2> out;
  for (const auto& e : j) out.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
  return out;
}

json traj_json(const TrajectoryAction& t) {
  return {{"dt_waypoint", t.dt_waypoint}, {"waypoints", vec2_list(t.waypoints)}};
}

TrajectoryAction traj_from(const json& j) {
  TrajectoryAction t;
  t.dt_waypoint = j.at("dt_waypoint").get<double>();
  t.waypoints = vec2_list_from(j.at("waypoints"));
  return t;
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& data) {
  static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < data.size(); i += 3) {
    std::uint32_t chunk = data[i] << 16;
    const std::size_t rem = data.size() - i;
    if (rem > 1) chunk |= data[i + 1] << 8;
    if (rem > 2) chunk |= data[i + 2];
    out.push_back(tbl[(chunk >> 18) & 63]);
    out.push_back(tbl[(chunk >> 12) & 63]);
    out.push_back(rem > 1 ? tbl[(chunk >> 6) & 63] : '=');
    out.push_back(rem > 2 ? tbl[chunk & 63] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    if (c == '=') return -1;
    throw std::runtime_error("invalid base64 character");
  };
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i + 3 < text.size(); i += 4) {
    const int a = val(text[i]), b = val(text[i + 1]), c = val(text[i + 2]), d = val(text[i + 3]);
    out.push_back(static_cast<std::uint8_t>((a << 2) | (b >> 4)));
    if (c >= 0) out.push_back(static_cast<std::uint8_t>(((b & 15) << 4) | (c >> 2)));
    if (d >= 0) out.push_back(static_cast<std::uint8_t>(((c & 3) << 6) | d));
  }
  return out;
}

std::string scene_to_json(const Scene& scene) {
  json j;
  j["scene_id"] = scene.scene_id;
  j["route"] = vec2_list(scene.route.points());
  j["drivable"] = vec2_list(scene.drivable);
  j["ego_start"] = {{"x", scene.ego_start.x},
                    {"y", scene.ego_start.y},
                    {"yaw", scene.ego_start.yaw},
                    {"v", scene.ego_start_speed}};
  j["adversarial"] = scene.adversarial;
  json agents = json::array();
  for (const AgentTrack& a : scene.agents) {
    json poses = json::array();
    for (const Pose2D& p : a.poses) poses.push_back({p.x, p.y, p.yaw});
    agents.push_back({{"agent_id", a.agent_id},
                      {"footprint", {a.length, a.width}},
                      {"replay_ratio", a.replay_ratio},
                      {"adversarial", a.adversarial},
                      {"poses", poses}});
  }
  j["agents"] = agents;
  return j.dump(2) + "\n";
}

Scene scene_from_json(const std::string& text) {
  const json j = json::parse(text);
  Scene scene;
  scene.scene_id = require(j, "scene_id", "scene").get<std::string>();
  const auto route_pts = vec2_list_from(require(j, "route", "scene"));
  if (route_pts.size() < 2) throw std::runtime_error("scene: route needs >= 2 points");
  scene.route = Polyline(route_pts);
  scene.drivable = vec2_list_from(require(j, "drivable", "scene"));
  const json ego = require(j, "ego_start", "scene");
  scene.ego_start = {require(ego, "x", "ego_start").get<double>(),
                     require(ego, "y", "ego_start").get<double>(),
                     require(ego, "yaw", "ego_start").get<double>()};
  scene.ego_start_speed = require(ego, "v", "ego_start").get<double>();
  scene.adversarial = j.value("adversarial", false);
  for (const auto& a : require(j, "agents", "scene")) {
    AgentTrack t;
    t.agent_id = require(a, "agent_id", "agent").get<std::string>();
    const json fp = require(a, "footprint", "agent");
    t.length = fp.at(0).get<double>();
    t.width = fp.at(1).get<double>();
    t.replay_ratio = require(a, "replay_ratio", "agent").get<double>();
    t.adversarial = a.value("adversarial", false);
    for (const auto& p : require(a, "poses", "agent"))
      t.poses.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    scene.agents.push_back(std::move(t));
  }
  scene.validate();
  return scene;
}

void save_scene(const Scene& scene, const std::string& path) {
  write_file(path, scene_to_json(scene));
}

Scene load_scene(const std::string& path) { return scene_from_json(read_file(path)); }

namespace {

json reward_json(const RewardVector& r) {
  return {r.r_route, r.r_dist, r.r_collision, r.r_speed};
}

RewardVector reward_from(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
          j.at(3).get<double>()};
}

json record_json(const TransitionRecord& r) {
  json j;
  j["scene_id"] = r.scene_id;
  j["t"] = r.t;
  json hist = json::array();
  for (const EgoHistoryFrame& f : r.ego_history.frames)
    hist.push_back({f.x, f.y, f.yaw, f.v, f.a, f.long_progress, f.lat_dist, f.command});
  j["ego_history"] = hist;
  j["observation"] = {{"grid_size", r.observation.grid_size},
                      {"cell_size", r.observation.cell_size},
                      {"bev", base64_encode(r.observation.bev)},
                      {"ego_v", r.observation.ego_v},
                      {"ego_a", r.observation.ego_a},
                      {"ego_yaw_rate", r.observation.ego_yaw_rate},
                      {"route_feat", vec2_list(r.observation.route_feat)}};
  j["base_action"] = traj_json(r.base_action);
  j["applied_action"] = traj_json(r.applied_action);
  json res = json::array();
  for (const Vec2& d : r.residual.deltas) res.push_back({d.x, d.y});
  j["residual"] = res;
  j["mode"] = r.mode;
  j["rewards"] = reward_json(r.rewards);
  j["q_labels"] = {r.q_labels.q_route, r.q_labels.q_dist, r.q_labels.q_collision,
                   r.q_labels.q_speed};
  json window = json::array();
  for (const RewardVector& w : r.reward_window) window.push_back(reward_json(w));
  j["reward_window"] = window;
  j["ref_deviation"] = r.ref_deviation;
  j["terminal"] = r.terminal_flag;
  return j;
}

TransitionRecord record_from(const json& j) {
  TransitionRecord r;
  r.scene_id = j.at("scene_id").get<std::string>();
  r.t = j.at("t").get<int>();
  for (const auto& f : j.at("ego_history")) {
    EgoHistoryFrame fr;
    fr.x = f.at(0).get<double>();
    fr.y = f.at(1).get<double>();
    fr.yaw = f.at(2).get<double>();
    fr.v = f.at(3).get<double>();
    fr.a = f.at(4).get<double>();
    fr.long_progress = f.at(5).get<double>();
    fr.lat_dist = f.at(6).get<double>();
    fr.command = f.at(7).get<int>();
    r.ego_history.frames.push_back(fr);
  }
  const json o = j.at("observation");
  r.observation.grid_size = o.at("grid_size").get<int>();
  r.observation.cell_size = o.at("cell_size").get<double>();
  r.observation.bev = base64_decode(o.at("bev").get<std::string>());
  r.observation.ego_v = o.at("ego_v").get<double>();
  r.observation.ego_a = o.at("ego_a").get<double>();
  r.observation.ego_yaw_rate = o.at("ego_yaw_rate").get<double>();
  r.observation.route_feat = vec2_list_from(o.at("route_feat"));
  r.base_action = traj_from(j.at("base_action"));
  r.applied_action = traj_from(j.at("applied_action"));
  for (const auto& d : j.at("residual"))
    r.residual.deltas.push_back({d.at(0).get<double>(), d.at(1).get<double>()});
  r.mode = j.at("mode").get<int>();
  r.rewards = reward_from(j.at("rewards"));
  const json q = j.at("q_labels");
  r.q_labels = {q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                q.at(3).get<double>()};
  for (const auto& w : j.at("reward_window")) r.reward_window.push_back(reward_from(w));
  r.ref_deviation = j.at("ref_deviation").get<double>();
  r.terminal_flag = j.at("terminal").get<bool>();
  return r;
}

}  // namespace

void save_dataset(const CounterfactualDataset& ds, const std::string& base_path) {
  json manifest;
  manifest["version"] = ds.manifest.version;
  manifest["seed"] = ds.manifest.seed;
  manifest["record_count"] = ds.records.size();
  manifest["scene_count"] = ds.manifest.scene_count;
  manifest["policy_failures"] = ds.manifest.policy_failures;
  manifest["config"] = ds.manifest.config_json;
  manifest["config_hash"] = ds.manifest.config_hash;
  write_file(base_path + ".manifest.json", manifest.dump(2) + "\n");

  std::ostringstream lines;
  for (const TransitionRecord& r : ds.records) lines << record_json(r).dump() << "\n";
  write_file(base_path + ".records.jsonl", lines.str());
}

CounterfactualDataset load_dataset(const std::string& base_path) {
  CounterfactualDataset ds;
  const json manifest = json::parse(read_file(base_path + ".manifest.json"));
  const std::string version = require(manifest, "version", "dataset manifest").get<std::string>();
  if (version != "mpa-cf-v1")
    throw std::runtime_error("dataset version mismatch: " + version);
  ds.manifest.version = version;
  ds.manifest.seed = manifest.at("seed").get<std::uint64_t>();
  ds.manifest.scene_count = manifest.at("scene_count").get<std::size_t>();
  ds.manifest.policy_failures = manifest.at("policy_failures").get<std::size_t>();
  ds.manifest.config_json = manifest.value("config", std::string());
  ds.manifest.config_hash = manifest.value("config_hash", std::string());
  const std::size_t expected = manifest.at("record_count").get<std::size_t>();

  std::istringstream in(read_file(base_path + ".records.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ds.records.push_back(record_from(json::parse(line)));
  }
  if (ds.records.size() != expected)
    throw std::runtime_error("dataset record count mismatch: manifest says " +
                             std::to_string(expected) + ", file has " +
                             std::to_string(ds.records.size()));
  ds.manifest.record_count = ds.records.size();
  return ds;
}

namespace {

constexpr char kNetMagic[8] = {'M', 'P', 'A', 'N', 'E', 'T', '1', '\n'};

json net_manifest(const DenseNet& net) {
  json dims = json::array();
  json acts = json::array();
  if (!net.layers.empty()) {
    dims.push_back(net.layers.front().W.cols());
    for (const Layer& l : net.layers) {
      dims.push_back(l.W.rows());
      acts.push_back(to_string(l.act));
    }
  }
  return {{"dims", dims}, {"acts", acts}};
}

void append_params(std::string& buf, const DenseNet& net) {
  auto push = [&buf](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  };
  for (const Layer& l : net.layers) {
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) push(l.W(r, c));
    for (Eigen::Index i = 0; i < l.b.size(); ++i) push(l.b(i));
  }
}

DenseNet net_from_manifest(const json& j, const char*& cursor, const char* end) {
  auto pull = [&cursor, end]() -> double {
    if (cursor + 8 > end) throw std::runtime_error("checkpoint truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(cursor[i])) << (8 * i);
    cursor += 8;
    return std::bit_cast<double>(bits);
  };
  DenseNet net;
  const auto dims = j.at("dims").get<std::vector<int>>();
  const auto acts = j.at("acts").get<std::vector<std::string>>();
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer l;
    l.W.resize(dims[i + 1], dims[i]);
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = pull();
    l.b.resize(dims[i + 1]);
    for (Eigen::Index k = 0; k < l.b.size(); ++k) l.b(k) = pull();
    l.act = activation_from_string(acts[i]);
    net.layers.push_back(std::move(l));
  }
  return net;
}

void write_checkpoint(const json& manifest, const std::vector<const DenseNet*>& nets,
                      const std::string& path) {
  std::string blob(kNetMagic, sizeof(kNetMagic));
  const std::string mtext = manifest.dump();
  const std::uint64_t len = mtext.size();
  for (int i = 0; i < 8; ++i) blob.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  blob += mtext;
  for (const DenseNet* net : nets) append_params(blob, *net);
  write_file(path, blob);
}

json read_checkpoint(const std::string& path, std::string& params, const char* expected_kind) {
  const std::string blob = read_file(path);
  if (blob.size() < 16 || std::memcmp(blob.data(), kNetMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i)
    len |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[8 + i])) << (8 * i);
  if (16 + len > blob.size()) throw std::runtime_error("checkpoint manifest truncated");
  const json manifest = json::parse(blob.substr(16, len));
  if (manifest.at("version").get<std::string>() != "mpa-net-v1")
    throw std::runtime_error("checkpoint version mismatch");
  if (manifest.at("kind").get<std::string>() != expected_kind)
    throw std::runtime_error(std::string("checkpoint kind mismatch: expected ") + expected_kind);
  params = blob.substr(16 + len);
  return manifest;
}

json schedule_json(const DiffusionSchedule& s) {
  return {{"K", s.K}, {"alpha_bar", s.alpha_bar}};
}

DiffusionSchedule schedule_from(const json& j) {
  DiffusionSchedule s;
  s.K = j.at("K").get<int>();
  s.alpha_bar = j.at("alpha_bar").get<std::vector<double>>();
  return s;
}

std::vector<double> eig_to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_to_eig(const std::vector<double>& v) {
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = v[i];
  return out;
}

}  // namespace

void save_policy(const BasePolicy& policy, const std::string& path, const std::string& config_hash,
                 std::uint64_t seed) {
  json m;
  m["version"] = "mpa-net-v1";
  m["kind"] = "policy";
  m["config_hash"] = config_hash;
  m["seed"] = seed;
  m["policy_kind"] = policy.kind == BasePolicy::Kind::scripted ? "scripted" : "cloned";
  m["t_fut"] = policy.t_fut;
  m["dt_waypoint"] = policy.dt_waypoint;
  m["scripted"] = {{"lookahead", policy.scripted.lookahead},
                   {"cruise_speed", policy.scripted.cruise_speed},
                   {"a_lat_comfort", policy.scripted.a_lat_comfort},
                   {"decel_comfort", policy.scripted.decel_comfort},
                   {"accel_comfort", policy.scripted.accel_comfort},
                   {"min_speed", policy.scripted.min_speed}};
  std::vector<const DenseNet*> nets;
  if (policy.kind == BasePolicy::Kind::cloned) {
    m["nets"] = {{"encoder", net_manifest(policy.encoder)}, {"head", net_manifest(policy.head)}};
    nets = {&policy.encoder, &policy.head};
  } else {
    m["nets"] = json::object();
  }
  write_checkpoint(m, nets, path);
}

BasePolicy load_policy(const std::string& path, std::string* config_hash) {
  std::string params;
  const json m = read_checkpoint(path, params, "policy");
  if (config_hash != nullptr) *config_hash = m.value("config_hash", std::string());
  BasePolicy p;
  p.t_fut = m.at("t_fut").get<int>();
  p.dt_waypoint = m.at("dt_waypoint").get<double>();
  const json s = m.at("scripted");
  p.scripted = {s.at("lookahead").get<double>(), s.at("cruise_speed").get<double>(),
                s.at("a_lat_comfort").get<double>(), s.at("decel_comfort").get<double>(),
                s.at("accel_comfort").get<double>(), s.at("min_speed").get<double>()};
  if (m.at("policy_kind").get<std::string>() == "cloned") {
    p.kind = BasePolicy::Kind::cloned;
    const char* cursor = params.data();
    const char* end = params.data() + params.size();
    p.encoder = net_from_manifest(m.at("nets").at("encoder"), cursor, end);
    p.head = net_from_manifest(m.at("nets").at("head"), cursor, end);
    p.trained = true;
  } else {
    p.kind = BasePolicy::Kind::scripted;
  }
  return p;
}

void save_adapter(const DenoiserModel& model, const std::string& path,
                  const std::string& config_hash, std::uint64_t seed) {
  json m;
  m["version"] = "mpa-net-v1";
  m["kind"] = "adapter";
  m["config_hash"] = config_hash;
  m["seed"] = seed;
  m["n_modes"] = model.n_modes;
  m["t_fut"] = model.t_fut;
  m["dt_waypoint"] = model.dt_waypoint;
  m["schedule"] = schedule_json(model.schedule);
  m["norm_mean"] = eig_to_vec(model.norm_mean);
  m["norm_std"] = eig_to_vec(model.norm_std);
  m["nets"] = {{"encoder", net_manifest(model.encoder)},
               {"denoiser", net_manifest(model.denoiser)}};
  write_checkpoint(m, {&model.encoder, &model.denoiser}, path);
}

DenoiserModel load_adapter(const std::string& path, std::string* config_hash) {
  std::string params;
  const json m = read_checkpoint(path, params, "adapter");
  if (config_hash != nullptr) *config_hash = m.value("config_hash", std::string());
  DenoiserModel model;
  model.n_modes = m.at("n_modes").get<int>();
  model.t_fut = m.at("t_fut").get<int>();
  model.dt_waypoint = m.at("dt_waypoint").get<double>();
  model.schedule = schedule_from(m.at("schedule"));
  model.norm_mean = vec_to_eig(m.at("norm_mean").get<std::vector<double>>());
  model.norm_std = vec_to_eig(m.at("norm_std").get<std::vector<double>>());
  const char* cursor = params.data();
  const char* end = params.data() + params.size();
  model.encoder = net_from_manifest(m.at("nets").at("encoder"), cursor, end);
  model.denoiser = net_from_manifest(m.at("nets").at("denoiser"), cursor, end);
  model.trained = true;
  return model;
}

void save_qmodel(const QValueModel& model, const std::string& path,
                 const std::string& config_hash, std::uint64_t seed) {
  json m;
  m["version"] = "mpa-net-v1";
  m["kind"] = "qmodel";
  m["config_hash"] = config_hash;
  m["seed"] = seed;
  m["t_fut"] = model.t_fut;
  m["label_horizon"] = model.label_horizon;
  m["weights"] = {model.weights.route, model.weights.dist, model.weights.collision,
                  model.weights.speed};
  m["label_mean"] = model.label_mean;
  m["label_std"] = model.label_std;
  m["nets"] = {{"encoder", net_manifest(model.encoder)},
               {"head_route", net_manifest(model.heads[0])},
               {"head_dist", net_manifest(model.heads[1])},
               {"head_collision", net_manifest(model.heads[2])},
               {"head_speed", net_manifest(model.heads[3])}};
  write_checkpoint(
      m, {&model.encoder, &model.heads[0], &model.heads[1], &model.heads[2], &model.heads[3]},
      path);
}

QValueModel load_qmodel(const std::string& path, std::string* config_hash) {
  std::string params;
  const json m = read_checkpoint(path, params, "qmodel");
  if (config_hash != nullptr) *config_hash = m.value("config_hash", std::string());
  QValueModel model;
  model.t_fut = m.at("t_fut").get<int>();
  model.label_horizon = m.at("label_horizon").get<int>();
  const json w = m.at("weights");
  model.weights = {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(),
                   w.at(3).get<double>()};
  model.label_mean = m.at("label_mean").get<std::array<double, 4>>();
  model.label_std = m.at("label_std").get<std::array<double, 4>>();
  const char* cursor = params.data();
  const char* end = params.data() + params.size();
  model.encoder = net_from_manifest(m.at("nets").at("encoder"), cursor, end);
  model.heads[0] = net_from_manifest(m.at("nets").at("head_route"), cursor, end);
  model.heads[1] = net_from_manifest(m.at("nets").at("head_dist"), cursor, end);
  model.heads[2] = net_from_manifest(m.at("nets").at("head_collision"), cursor, end);
  model.heads[3] = net_from_manifest(m.at("nets").at("head_speed"), cursor, end);
  model.trained = true;
  return model;
}

namespace {

json runconfig_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["splits"] = {{"train", c.splits.train},
                 {"eval_nominal", c.splits.eval_nominal},
                 {"eval_safety", c.splits.eval_safety}};
  j["sim"] = {{"dt", c.sim.dt},
              {"substeps", c.sim.substeps},
              {"wheelbase", c.sim.wheelbase},
              {"ego_length", c.sim.ego_length},
              {"ego_width", c.sim.ego_width},
              {"steer_max", c.sim.steer_max},
              {"accel_min", c.sim.accel_min},
              {"accel_max", c.sim.accel_max},
              {"grid_size", c.sim.grid_size},
              {"cell_size", c.sim.cell_size},
              {"route_feat_points", c.sim.route_feat_points},
              {"d_far", c.sim.d_far},
              {"max_steps", c.sim.max_steps},
              {"route_complete_slack", c.sim.route_complete_slack},
              {"offroad_ratio", c.sim.offroad_ratio},
              {"nc_inflation", c.sim.nc_inflation},
              {"t_hist", c.sim.t_hist},
              {"t_fut", c.sim.t_fut},
              {"dt_waypoint", c.sim.dt_waypoint}};
  j["reward"] = {{"delta_collision", c.reward.delta_collision},
                 {"delta_velo", c.reward.delta_velo},
                 {"gamma", c.reward.gamma},
                 {"label_horizon", c.reward.label_horizon}};
  j["weights"] = {{"route", c.weights.route},
                  {"dist", c.weights.dist},
                  {"collision", c.weights.collision},
                  {"speed", c.weights.speed}};
  j["lqr"] = {{"q_lat", c.lqr.q_lat},
              {"q_yaw", c.lqr.q_yaw},
              {"q_v", c.lqr.q_v},
              {"r_steer", c.lqr.r_steer},
              {"r_accel", c.lqr.r_accel},
              {"riccati_iters", c.lqr.riccati_iters},
              {"riccati_tol", c.lqr.riccati_tol},
              {"v_lin_floor", c.lqr.v_lin_floor}};
  j["expert"] = {{"lookahead", c.expert.lookahead},
                 {"cruise_speed", c.expert.cruise_speed},
                 {"a_lat_comfort", c.expert.a_lat_comfort},
                 {"decel_comfort", c.expert.decel_comfort},
                 {"accel_comfort", c.expert.accel_comfort},
                 {"min_speed", c.expert.min_speed}};
  j["cf"] = {{"t_rollout", c.cf.t_rollout},
             {"delta_max", c.cf.delta_max},
             {"reward_cutoff", c.cf.reward_cutoff},
             {"beam_width", c.cf.beam_width},
             {"branches_per_step", c.cf.branches_per_step},
             {"rotation_min_deg", c.cf.aug.rotation_min_deg},
             {"rotation_max_deg", c.cf.aug.rotation_max_deg},
             {"warp_min", c.cf.aug.warp_min},
             {"warp_max", c.cf.aug.warp_max},
             {"noise_std", c.cf.noise_std},
             {"rotation_bins", c.cf.grid.rotation_bins},
             {"warp_bins", c.cf.grid.warp_bins}};
  j["bc"] = {{"encoder_hidden", c.bc.encoder_hidden},
             {"head_hidden", c.bc.head_hidden},
             {"lr", c.bc.lr},
             {"batch_size", c.bc.batch_size},
             {"steps", c.bc.steps}};
  j["adapter"] = {{"encoder_hidden", c.adapter.encoder_hidden},
                  {"denoiser_hidden", c.adapter.denoiser_hidden},
                  {"n_modes", c.adapter.n_modes},
                  {"diffusion_steps", c.adapter.diffusion_steps},
                  {"schedule", c.adapter.schedule == ScheduleKind::cosine ? "cosine" : "linear"},
                  {"lr", c.adapter.lr},
                  {"batch_size", c.adapter.batch_size},
                  {"steps", c.adapter.steps}};
  j["q"] = {{"encoder_hidden", c.q.encoder_hidden},
            {"head_hidden", c.q.head_hidden},
            {"lr", c.q.lr},
            {"batch_size", c.q.batch_size},
            {"steps", c.q.steps},
            {"encoder_warmup_steps", c.q.encoder_warmup_steps}};
  j["metrics"] = {{"weight_ttc", c.metrics.weight_ttc},
                  {"weight_com", c.metrics.weight_com},
                  {"ttc_window", c.metrics.ttc_window},
                  {"a_lon_min", c.metrics.a_lon_min},
                  {"a_lon_max", c.metrics.a_lon_max},
                  {"a_lat_max", c.metrics.a_lat_max},
                  {"yaw_rate_max", c.metrics.yaw_rate_max},
                  {"yaw_accel_max", c.metrics.yaw_accel_max},
                  {"jerk_max", c.metrics.jerk_max}};
  j["samples"] = c.samples;
  j["ddim_steps"] = c.ddim_steps;
  j["workers"] = c.workers;
  return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string runconfig_to_json(const RunConfig& cfg) { return runconfig_json(cfg).dump(2) + "\n"; }

RunConfig runconfig_from_json(const std::string& text) {
  const json j = json::parse(text);
  RunConfig c;
  maybe(j, "seed", c.seed);
  if (j.contains("splits")) {
    const json s = j.at("splits");
    maybe(s, "train", c.splits.train);
    maybe(s, "eval_nominal", c.splits.eval_nominal);
    maybe(s, "eval_safety", c.splits.eval_safety);
  }
  if (j.contains("sim")) {
    const json s = j.at("sim");
    maybe(s, "dt", c.sim.dt);
    maybe(s, "substeps", c.sim.substeps);
    maybe(s, "wheelbase", c.sim.wheelbase);
    maybe(s, "ego_length", c.sim.ego_length);
    maybe(s, "ego_width", c.sim.ego_width);
    maybe(s, "steer_max", c.sim.steer_max);
    maybe(s, "accel_min", c.sim.accel_min);
    maybe(s, "accel_max", c.sim.accel_max);
    maybe(s, "grid_size", c.sim.grid_size);
    maybe(s, "cell_size", c.sim.cell_size);
    maybe(s, "route_feat_points", c.sim.route_feat_points);
    maybe(s, "d_far", c.sim.d_far);
    maybe(s, "max_steps", c.sim.max_steps);
    maybe(s, "route_complete_slack", c.sim.route_complete_slack);
    maybe(s, "offroad_ratio", c.sim.offroad_ratio);
    maybe(s, "nc_inflation", c.sim.nc_inflation);
    maybe(s, "t_hist", c.sim.t_hist);
    maybe(s, "t_fut", c.sim.t_fut);
    maybe(s, "dt_waypoint", c.sim.dt_waypoint);
  }
  if (j.contains("reward")) {
    const json s = j.at("reward");
    maybe(s, "delta_collision", c.reward.delta_collision);
    maybe(s, "delta_velo", c.reward.delta_velo);
    maybe(s, "gamma", c.reward.gamma);
    maybe(s, "label_horizon", c.reward.label_horizon);
  }
  if (j.contains("weights")) {
    const json s = j.at("weights");
    maybe(s, "route", c.weights.route);
    maybe(s, "dist", c.weights.dist);
    maybe(s, "collision", c.weights.collision);
    maybe(s, "speed", c.weights.speed);
  }
  if (j.contains("lqr")) {
    const json s = j.at("lqr");
    maybe(s, "q_lat", c.lqr.q_lat);
    maybe(s, "q_yaw", c.lqr.q_yaw);
    maybe(s, "q_v", c.lqr.q_v);
    maybe(s, "r_steer", c.lqr.r_steer);
    maybe(s, "r_accel", c.lqr.r_accel);
    maybe(s, "riccati_iters", c.lqr.riccati_iters);
    maybe(s, "riccati_tol", c.lqr.riccati_tol);
    maybe(s, "v_lin_floor", c.lqr.v_lin_floor);
  }
  if (j.contains("expert")) {
    const json s = j.at("expert");
    maybe(s, "lookahead", c.expert.lookahead);
    maybe(s, "cruise_speed", c.expert.cruise_speed);
    maybe(s, "a_lat_comfort", c.expert.a_lat_comfort);
    maybe(s, "decel_comfort", c.expert.decel_comfort);
    maybe(s, "accel_comfort", c.expert.accel_comfort);
    maybe(s, "min_speed", c.expert.min_speed);
  }
  if (j.contains("cf")) {
    const json s = j.at("cf");
    maybe(s, "t_rollout", c.cf.t_rollout);
    maybe(s, "delta_max", c.cf.delta_max);
    maybe(s, "reward_cutoff", c.cf.reward_cutoff);
    maybe(s, "beam_width", c.cf.beam_width);
    maybe(s, "branches_per_step", c.cf.branches_per_step);
    maybe(s, "rotation_min_deg", c.cf.aug.rotation_min_deg);
    maybe(s, "rotation_max_deg", c.cf.aug.rotation_max_deg);
    maybe(s, "warp_min", c.cf.aug.warp_min);
    maybe(s, "warp_max", c.cf.aug.warp_max);
    maybe(s, "noise_std", c.cf.noise_std);
    maybe(s, "rotation_bins", c.cf.grid.rotation_bins);
    maybe(s, "warp_bins", c.cf.grid.warp_bins);
  }
  if (j.contains("bc")) {
    const json s = j.at("bc");
    maybe(s, "encoder_hidden", c.bc.encoder_hidden);
    maybe(s, "head_hidden", c.bc.head_hidden);
    maybe(s, "lr", c.bc.lr);
    maybe(s, "batch_size", c.bc.batch_size);
    maybe(s, "steps", c.bc.steps);
  }
  if (j.contains("adapter")) {
    const json s = j.at("adapter");
    maybe(s, "encoder_hidden", c.adapter.encoder_hidden);
    maybe(s, "denoiser_hidden", c.adapter.denoiser_hidden);
    maybe(s, "n_modes", c.adapter.n_modes);
    maybe(s, "diffusion_steps", c.adapter.diffusion_steps);
    if (s.contains("schedule"))
      c.adapter.schedule = s.at("schedule").get<std::string>() == "linear" ? ScheduleKind::linear
                                                                           : ScheduleKind::cosine;
    maybe(s, "lr", c.adapter.lr);
    maybe(s, "batch_size", c.adapter.batch_size);
    maybe(s, "steps", c.adapter.steps);
  }
  if (j.contains("q")) {
    const json s = j.at("q");
    maybe(s, "encoder_hidden", c.q.encoder_hidden);
    maybe(s, "head_hidden", c.q.head_hidden);
    maybe(s, "lr", c.q.lr);
    maybe(s, "batch_size", c.q.batch_size);
    maybe(s, "steps", c.q.steps);
    maybe(s, "encoder_warmup_steps", c.q.encoder_warmup_steps);
  }
  if (j.contains("metrics")) {
    const json s = j.at("metrics");
    maybe(s, "weight_ttc", c.metrics.weight_ttc);
    maybe(s, "weight_com", c.metrics.weight_com);
    maybe(s, "ttc_window", c.metrics.ttc_window);
    maybe(s, "a_lon_min", c.metrics.a_lon_min);
    maybe(s, "a_lon_max", c.metrics.a_lon_max);
    maybe(s, "a_lat_max", c.metrics.a_lat_max);
    maybe(s, "yaw_rate_max", c.metrics.yaw_rate_max);
    maybe(s, "yaw_accel_max", c.metrics.yaw_accel_max);
    maybe(s, "jerk_max", c.metrics.jerk_max);
  }
  maybe(j, "samples", c.samples);
  maybe(j, "ddim_steps", c.ddim_steps);
  maybe(j, "workers", c.workers);
  // Propagate the cross-module fields the sub-configs repeat.
  c.bc.t_fut = c.sim.t_fut;
  c.bc.dt_waypoint = c.sim.dt_waypoint;
  c.bc.workers = c.workers;
  c.adapter.workers = c.workers;
  c.q.workers = c.workers;
  c.cf.weights = c.weights;
  c.cf.seed = c.seed;
  return c;
}

RunConfig load_runconfig(const std::string& path) {
  return runconfig_from_json(read_file(path));
}

void save_runconfig(const RunConfig& cfg, const std::string& path) {
  write_file(path, runconfig_to_json(cfg));
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = runconfig_to_json(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ostringstream out;
  out << "model,split,RC,NC,DAC,TTC,COM,HDScore\n";
  char line[256];
  for (const MetricsRow& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%s,%.1f,%.1f,%.1f,%.1f,%.1f,%.1f\n", r.model.c_str(),
                  r.split.c_str(), r.metrics.rc, r.metrics.nc, r.metrics.dac, r.metrics.ttc,
                  r.metrics.com, r.metrics.hdscore);
    out << line;
  }
  write_file(path, out.str());
}

void write_traces(const EvalResult& result, const std::string& path) {
  std::ostringstream out;
  for (const EpisodeTrace& e : result.episodes) {
    for (const TraceFrame& f : e.frames) {
      json j;
      j["scene_id"] = e.scene_id;
      j["t"] = f.t;
      j["ego"] = {f.ego.x, f.ego.y, f.ego.yaw};
      j["v"] = f.v;
      j["action"] = traj_json(f.action);
      j["chosen_candidate"] = f.chosen_candidate;
      j["q_table"] = f.q_table;
      j["scores"] = {{"nc", f.scores.nc},
                     {"dac", f.scores.dac},
                     {"ttc", f.scores.ttc},
                     {"com", f.scores.com}};
      out << j.dump() << "\n";
    }
    json summary;
    summary["scene_id"] = e.scene_id;
    summary["episode_end"] = {{"termination", to_string(e.metrics.termination)},
                              {"rc", e.metrics.rc},
                              {"hdscore", e.metrics.hdscore},
                              {"frames", e.metrics.frames}};
    out << summary.dump() << "\n";
  }
  write_file(path, out.str());
}

void write_report(const std::vector<ReportTable>& tables, const std::string& dir) {
  if (tables.empty()) throw std::invalid_argument("write_report: no tables");
  std::filesystem::create_directories(dir);
  std::ostringstream summary;
  for (const ReportTable& table : tables) {
    std::ostringstream csv;
    csv << "label";
    for (const std::string& c : table.columns) csv << "," << c;
    csv << "\n";
    for (const auto& [label, values] : table.rows) {
      csv << label;
      for (const double v : values) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), ",%.4f", v);
        csv << buf;
      }
      csv << "\n";
    }
    write_file(dir + "/" + table.name + ".csv", csv.str());

    // Best and runner-up per column; ties share the marking.
    summary << "== " << table.name << "\n";
    for (std::size_t col = 0; col < table.columns.size(); ++col) {
      double best = -std::numeric_limits<double>::infinity();
      double second = -std::numeric_limits<double>::infinity();
      for (const auto& [label, values] : table.rows) {
        const double v = values[col];
        if (v > best) {
          second = best;
          best = v;
        } else if (v > second && v < best) {
          second = v;
        }
      }
      summary << table.columns[col] << ": best [";
      bool first = true;
      for (const auto& [label, values] : table.rows) {
        if (values[col] == best) {
          summary << (first ? "" : " ") << label;
          first = false;
        }
      }
      summary << "]";
      if (second > -std::numeric_limits<double>::infinity()) {
        summary << " runner-up [";
        first = true;
        for (const auto& [label, values] : table.rows) {
          if (values[col] == second) {
            summary << (first ? "" : " ") << label;
            first = false;
          }
        }
        summary << "]";
      }
      summary << "\n";
    }
    summary << "\n";
  }
  write_file(dir + "/summary.txt", summary.str());
}

}  // namespace mpa
