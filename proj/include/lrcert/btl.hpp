#pragma once

// The BTL link and its derived quantities: win probability, logistic loss,
// score residual, Fisher weight. All overflow-safe for |eta| up to ~700.

#include <cmath>
#include <stdexcept>

namespace lrcert {

// sigma(eta) = 1 / (1 + exp(-eta))
inline double btl_prob(double eta) {
  if (!std::isfinite(eta)) throw std::invalid_argument("btl_prob: non-finite input");
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  double e = std::exp(eta);
  return e / (1.0 + e);
}

// softplus(x) = log(1 + e^x), computed as max(x,0) + log1p(e^{-|x|}).
inline double softplus(double x) {
  return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

// l(y, eta) = log(1 + e^eta) - y*eta
inline double btl_loss(double y, double eta) {
  if (!std::isfinite(eta)) throw std::invalid_argument("btl_loss: non-finite input");
  return softplus(eta) - y * eta;
}

// Score residual s(y, eta) = y - sigma(eta); the negative loss derivative.
inline double btl_score(double y, double eta) { return y - btl_prob(eta); }

// I(eta) = sigma(eta) * (1 - sigma(eta)), in (0, 1/4].
// Computed as e^{-|eta|} / (1 + e^{-|eta|})^2 so the small factor never
// cancels to zero for large |eta|.
inline double fisher_weight(double eta) {
  if (!std::isfinite(eta)) throw std::invalid_argument("fisher_weight: non-finite input");
  double e = std::exp(-std::fabs(eta));
  double denom = 1.0 + e;
  return e / (denom * denom);
}

}  // namespace lrcert
