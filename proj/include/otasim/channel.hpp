#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "otasim/rng.hpp"
#include "otasim/signal.hpp"

namespace otasim {

// h = k_const * (d0/d)^gamma * psi * h_ray, with psi = 10^(X/10),
// X ~ Normal(0, shadow_sigma_db^2), drawn once per realization, and h_ray
// i.i.d. circularly-symmetric complex Gaussian with E|h_ray|^2 = 1.
struct FadingParams {
  double k_const = 1.0;
  double d0 = 1.0;
  double gamma = 2.7;
  double shadow_sigma_db = 8.0;
};

inline void validate(const FadingParams& p) {
  if (!(p.d0 > 0.0)) throw std::invalid_argument("fading: d0 must be > 0");
  if (!(p.gamma > 0.0)) throw std::invalid_argument("fading: gamma must be > 0");
  if (p.shadow_sigma_db < 0.0)
    throw std::invalid_argument("fading: shadow_sigma_db must be >= 0");
}

// Per-symbol complex gains of one channel draw (the diagonal of H).
struct ChannelRealization {
  std::vector<cplx> gains;
  double distance = 1.0;

  std::size_t size() const { return gains.size(); }
};

struct Topology {
  double d_bt = 1.0;  // background -> transmitter, fixed at 1
  double d_ba = 1.0;  // background -> adversary
  double d_ta = 1.0;  // transmitter -> adversary
  std::string label;
};

inline void validate(const Topology& t) {
  if (!(t.d_bt > 0.0 && t.d_ba > 0.0 && t.d_ta > 0.0))
    throw std::invalid_argument("topology: distances must be > 0");
}

inline ChannelRealization sample_channel(const FadingParams& p, double d,
                                         std::size_t k, Rng& rng) {
  if (!(d > 0.0)) throw std::invalid_argument("sample_channel: d must be > 0");
  if (k == 0) throw std::invalid_argument("sample_channel: k must be >= 1");
  validate(p);
  const double shadow_db = p.shadow_sigma_db * rng.next_gaussian();
  const double psi = std::pow(10.0, shadow_db / 10.0);
  const double amp = p.k_const * std::pow(p.d0 / d, p.gamma) * psi;
  ChannelRealization h;
  h.distance = d;
  h.gains.resize(k);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto [g1, g2] = rng.next_gaussian_pair();
    h.gains[i] = cplx{amp * g1 * inv_sqrt2, amp * g2 * inv_sqrt2};
  }
  return h;
}

// Elementwise product: out_i = gain_i * x_i (diagonal H times x).
inline IqFrame apply(const ChannelRealization& h, const IqFrame& x) {
  if (h.size() != x.size()) throw std::invalid_argument("apply: length mismatch");
  IqFrame out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = h.gains[i] * x[i];
  return out;
}

inline IqFrame receive(const ChannelRealization& h, const IqFrame& x,
                       double noise_power, Rng& rng) {
  return add(apply(h, x), awgn(x.size(), noise_power, rng));
}

inline IqFrame receive_with_perturbation(const ChannelRealization& h_bx,
                                         const IqFrame& x,
                                         const ChannelRealization& h_ax,
                                         const IqFrame& delta,
                                         double noise_power, Rng& rng) {
  IqFrame out = add(apply(h_bx, x), apply(h_ax, delta));
  return add(out, awgn(x.size(), noise_power, rng));
}

}  // namespace otasim
