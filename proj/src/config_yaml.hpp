#pragma once

#include <yaml-cpp/yaml.h>

#include <string>

#include "citsbed/channel.hpp"
#include "citsbed/facilities.hpp"
#include "citsbed/scenario.hpp"

namespace citsbed::yamlcfg {

template <typename T>
inline T get(const YAML::Node& node, const char* key, T fallback) {
  if (!node[key]) return fallback;
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ScenarioError(std::string("invalid value for '") + key + "': " + e.what());
  }
}

inline CamTriggerConfig parseTrigger(const YAML::Node& node, CamTriggerConfig cfg) {
  if (!node) return cfg;
  cfg.heading_threshold_deg = get(node, "heading_threshold_deg", cfg.heading_threshold_deg);
  cfg.position_threshold_m = get(node, "position_threshold_m", cfg.position_threshold_m);
  cfg.speed_threshold_mps = get(node, "speed_threshold_mps", cfg.speed_threshold_mps);
  cfg.t_gen_min_ms = get<int64_t>(node, "t_gen_min_ms", cfg.t_gen_min_ms);
  cfg.t_gen_max_ms = get<int64_t>(node, "t_gen_max_ms", cfg.t_gen_max_ms);
  return cfg;
}

inline void parseChannel(const YAML::Node& ch, LinkBudgetConfig& l, PropagationModel& model) {
  const std::string name = get<std::string>(ch, "model", "free_space");
  if (name == "two_ray") {
    model = TwoRayModel{get(ch, "h_tx_m", 1.5), get(ch, "h_rx_m", 1.5), get(ch, "reflection_coeff", -1.0)};
  } else if (name == "free_space") {
    model = FreeSpaceModel{};
  } else {
    throw ScenarioError("unknown propagation model '" + name + "'");
  }
  l.fc_hz = get(ch, "fc_hz", l.fc_hz);
  l.tx_antenna_gain_dbi = get(ch, "tx_antenna_gain_dbi", l.tx_antenna_gain_dbi);
  l.rx_antenna_gain_dbi = get(ch, "rx_antenna_gain_dbi", l.rx_antenna_gain_dbi);
  l.cable_loss_db = get(ch, "cable_loss_db", l.cable_loss_db);
  l.sensitivity_dbm = get(ch, "sensitivity_dbm", l.sensitivity_dbm);
  l.shadowing_sigma_db = get(ch, "shadowing_sigma_db", l.shadowing_sigma_db);
  l.rng_seed = get<uint64_t>(ch, "seed", l.rng_seed);
}

}  // namespace citsbed::yamlcfg
