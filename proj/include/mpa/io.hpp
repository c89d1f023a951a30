#pragma once

#include <string>
#include <vector>

#include "mpa/config.hpp"

namespace mpa {

// Scene JSON (units meters/radians): scene_id, route [[x,y]...],
// drivable [[x,y]...] ring, agents [{agent_id, footprint [l,w],
// replay_ratio, adversarial, poses [[x,y,yaw]...]}], ego_start
// {x,y,yaw,v}, adversarial.
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

// Dataset: <base>.manifest.json + <base>.records.jsonl, one record per
// line, rasters as base64 of row-major bytes. Manifest version
// "mpa-cf-v1"; record counts are validated on load.
void save_dataset(const CounterfactualDataset& ds, const std::string& base_path);
CounterfactualDataset load_dataset(const std::string& base_path);

// Model checkpoints ("mpa-net-v1"): a JSON manifest followed by the raw
// little-endian float64 parameter block of all nets in manifest order.
void save_policy(const BasePolicy& policy, const std::string& path, const std::string& config_hash,
                 std::uint64_t seed);
BasePolicy load_policy(const std::string& path, std::string* config_hash = nullptr);

void save_adapter(const DenoiserModel& model, const std::string& path,
                  const std::string& config_hash, std::uint64_t seed);
DenoiserModel load_adapter(const std::string& path, std::string* config_hash = nullptr);

void save_qmodel(const QValueModel& model, const std::string& path,
                 const std::string& config_hash, std::uint64_t seed);
QValueModel load_qmodel(const std::string& path, std::string* config_hash = nullptr);

// Run configuration.
std::string runconfig_to_json(const RunConfig& cfg);
RunConfig runconfig_from_json(const std::string& text);
RunConfig load_runconfig(const std::string& path);
void save_runconfig(const RunConfig& cfg, const std::string& path);
// FNV-1a over the canonical JSON dump.
std::string config_hash(const RunConfig& cfg);

// Metrics table CSV: model, split, RC, NC, DAC, TTC, COM, HDScore
// (x100, 1 decimal).
struct MetricsRow {
  std::string model;
  std::string split;
  EpisodeMetrics metrics;
};
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

// Per-episode trace JSONL.
void write_traces(const EvalResult& result, const std::string& path);

// Generic numeric table: CSV plus a plain-text summary marking best and
// runner-up per column (ties share the marking).
struct ReportTable {
  std::string name;
  std::vector<std::string> columns;                            // value columns
  std::vector<std::pair<std::string, std::vector<double>>> rows;  // label -> values
};
void write_report(const std::vector<ReportTable>& tables, const std::string& dir);

std::string base64_encode(const std::vector<std::uint8_t>& data);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace mpa
