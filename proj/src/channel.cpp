#include "citsbed/channel.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace citsbed {

void LinkBudgetConfig::validate() const {
  if (!std::isfinite(sensitivity_dbm) || !std::isfinite(tx_power_dbm)) {
    throw std::invalid_argument("link budget powers must be finite");
  }
  if (!(shadowing_sigma_db >= 0.0)) throw std::invalid_argument("shadowing sigma must be >= 0");
  if (!(fc_hz > 0.0)) throw std::invalid_argument("carrier frequency must be positive");
}

void validate(const PropagationModel& model) {
  if (const auto* tr = std::get_if<TwoRayModel>(&model)) {
    if (!(tr->h_tx_m > 0.0 && tr->h_rx_m > 0.0)) {
      throw std::invalid_argument("two-ray antenna heights must be positive");
    }
  }
}

PowerDb twoRayLossDb(double distance_m, double h_tx_m, double h_rx_m, double fc_hz, double gamma) {
  if (!(distance_m > 0.0)) throw std::invalid_argument("two-ray loss needs a positive distance");
  if (!(h_tx_m > 0.0 && h_rx_m > 0.0)) throw std::invalid_argument("antenna heights must be positive");
  const double lambda = wavelengthM(fc_hz);
  const double d_los = std::hypot(distance_m, h_tx_m - h_rx_m);
  const double d_refl = std::hypot(distance_m, h_tx_m + h_rx_m);
  const double dphi = 2.0 * std::numbers::pi * (d_refl - d_los) / lambda;
  const double gain = std::abs(1.0 + gamma * std::polar(1.0, dphi));
  const double amplitude = lambda / (4.0 * std::numbers::pi * d_los) * gain;
  if (amplitude <= 0.0) return {std::numeric_limits<double>::infinity()};
  return {-20.0 * std::log10(amplitude)};
}

PowerDb pathLossDb(double distance_m, const PropagationModel& model, double fc_hz) {
  if (const auto* tr = std::get_if<TwoRayModel>(&model)) {
    return twoRayLossDb(distance_m, tr->h_tx_m, tr->h_rx_m, fc_hz, tr->reflection_coeff);
  }
  return freeSpaceLossDb(distance_m, fc_hz);
}

PowerDbm receivedPowerDbm(double distance_m, const LinkBudgetConfig& cfg,
                          const PropagationModel& model, double shadowing_db) {
  const PowerDb gains{cfg.tx_antenna_gain_dbi + cfg.rx_antenna_gain_dbi - cfg.cable_loss_db};
  return PowerDbm{cfg.tx_power_dbm} + gains - pathLossDb(distance_m, model, cfg.fc_hz) -
         PowerDb{shadowing_db};
}

Reception receptionDecision(PowerDbm p_rx, const LinkBudgetConfig& cfg) {
  return p_rx.value >= cfg.sensitivity_dbm ? Reception::Received : Reception::Lost;
}

ShadowingSource::ShadowingSource(double sigma_db, uint64_t seed) : sigma_db_(sigma_db), rng_(seed) {
  if (!(sigma_db >= 0.0)) throw std::invalid_argument("shadowing sigma must be >= 0");
}

double ShadowingSource::draw() {
  if (sigma_db_ == 0.0) return 0.0;
  return sigma_db_ * normal_(rng_);
}

double freeSpaceCrossoverDistanceM(const LinkBudgetConfig& cfg) {
  const double budget_db = cfg.tx_power_dbm + cfg.tx_antenna_gain_dbi + cfg.rx_antenna_gain_dbi -
                           cfg.cable_loss_db - cfg.sensitivity_dbm;
  return wavelengthM(cfg.fc_hz) / (4.0 * std::numbers::pi) * std::pow(10.0, budget_db / 20.0);
}

double calibrateSensitivityDbm(const LinkBudgetConfig& cfg, double range_m) {
  return cfg.tx_power_dbm + cfg.tx_antenna_gain_dbi + cfg.rx_antenna_gain_dbi - cfg.cable_loss_db -
         freeSpaceLossDb(range_m, cfg.fc_hz).value;
}

}  // namespace citsbed
