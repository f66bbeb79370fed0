#pragma once

#include <cstdint>
#include <random>
#include <variant>

#include "citsbed/core.hpp"

namespace citsbed {

struct LinkBudgetConfig {
  double tx_power_dbm = 26.0;
  double tx_antenna_gain_dbi = 3.9;
  double rx_antenna_gain_dbi = 3.9;
  double cable_loss_db = 0.0;
  double fc_hz = 5.9e9;
  double sensitivity_dbm = -85.0;
  double shadowing_sigma_db = 0.0;
  uint64_t rng_seed = 1;

  void validate() const;
};

struct FreeSpaceModel {};

struct TwoRayModel {
  double h_tx_m = 1.5;
  double h_rx_m = 1.5;
  double reflection_coeff = -1.0;
};

using PropagationModel = std::variant<FreeSpaceModel, TwoRayModel>;

void validate(const PropagationModel& model);

/// Two-path phasor sum over flat ground. Returns +infinity at an exact null.
/// Throws std::invalid_argument for d <= 0 or non-positive heights.
PowerDb twoRayLossDb(double distance_m, double h_tx_m, double h_rx_m, double fc_hz, double gamma);

PowerDb pathLossDb(double distance_m, const PropagationModel& model, double fc_hz);

/// tx_power + gains - cable - path loss - shadowing_db
PowerDbm receivedPowerDbm(double distance_m, const LinkBudgetConfig& cfg,
                          const PropagationModel& model, double shadowing_db);

enum class Reception { Received, Lost };

/// Link distances are clamped to this floor before evaluating path loss.
inline constexpr double kMinLinkDistanceM = 1.0;

/// Hard threshold: received iff p_rx >= sensitivity.
Reception receptionDecision(PowerDbm p_rx, const LinkBudgetConfig& cfg);

/// Zero-mean Gaussian shadowing draws from a seeded generator.
class ShadowingSource {
 public:
  ShadowingSource(double sigma_db, uint64_t seed);
  double draw();

 private:
  double sigma_db_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Distance where the free-space link budget meets the sensitivity exactly.
double freeSpaceCrossoverDistanceM(const LinkBudgetConfig& cfg);

/// Sensitivity that puts the free-space crossover at `range_m`.
double calibrateSensitivityDbm(const LinkBudgetConfig& cfg, double range_m);

}  // namespace citsbed
