#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "otasim/channel.hpp"
#include "otasim/neuralnet.hpp"
#include "otasim/signal.hpp"

namespace otasim {

// Anything the attacker can query for a hard label and an input-space loss
// gradient. otasim::Model satisfies this; tests plug in analytic stand-ins.
template <typename S>
concept SurrogateClassifier = requires(const S& s, const IqFrame& f, ClassLabel y) {
  { classify(s, f) } -> std::same_as<ClassLabel>;
  { input_gradient_frame(s, f, y) } -> std::same_as<std::vector<cplx>>;
};

enum class PowerRule { MaxBudget, SurrogateSearch };
enum class InputSource { TransmitterInput, AdversaryInput };

struct AttackSpec {
  PowerRule power_rule = PowerRule::MaxBudget;
  InputSource input_source = InputSource::TransmitterInput;
  double p_max = 1.0;   // power budget on ||delta||^2
  double eps_acc = 1e-3;  // bisection amplitude accuracy
  // Runs the published pseudocode verbatim (inverted gate and branch
  // directions) instead of the corrected minimal-power search.
  bool literal_search = false;
};

inline void validate(const AttackSpec& s) {
  if (!(s.p_max > 0.0)) throw std::invalid_argument("attack: p_max must be positive");
  if (!(s.eps_acc > 0.0))
    throw std::invalid_argument("attack: eps_acc must be positive");
  if (!(s.eps_acc < std::sqrt(s.p_max)))
    throw std::invalid_argument("attack: eps_acc must be below sqrt(p_max)");
}

struct Perturbation {
  IqFrame delta;             // transmitted perturbation (zero when not attacking)
  double epsilon_used = 0.0;  // amplitude actually applied
  bool attacked = false;
  std::size_t search_iterations = 0;  // bisection probes (search rule only)
  bool flip_found = false;            // surrogate flipped within the budget
};

inline Perturbation no_attack(std::size_t k) {
  Perturbation p;
  p.delta.samples.assign(k, cplx{0.0, 0.0});
  return p;
}

// Unit-l2 attack direction: the channel-conjugated gradient of the surrogate
// loss toward Noise at r_ref, normalized. Returns nothing when the gradient
// or channel is degenerate (caller falls back to not attacking).
template <SurrogateClassifier S>
std::optional<IqFrame> mrpp_direction(const S& surrogate, const IqFrame& r_ref,
                                      const ChannelRealization& h_at) {
  if (h_at.size() != r_ref.size())
    throw std::invalid_argument("mrpp_direction: channel/frame length mismatch");
  const std::vector<cplx> g = input_gradient_frame(surrogate, r_ref, ClassLabel::Noise);
  IqFrame dir;
  dir.samples.resize(g.size());
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    dir.samples[i] = std::conj(h_at.gains[i]) * g[i];
    norm_sq += std::norm(dir.samples[i]);
  }
  if (!(norm_sq > 0.0) || !std::isfinite(norm_sq)) return std::nullopt;
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (cplx& c : dir.samples) c *= inv;
  return dir;
}

// Spends the whole budget along the MRPP direction: delta = -sqrt(p_max) * dir.
template <SurrogateClassifier S>
Perturbation craft_max_power(const S& surrogate, const IqFrame& r_ref,
                             const ChannelRealization& h_at, double p_max) {
  if (p_max < 0.0) throw std::invalid_argument("craft_max_power: negative budget");
  const std::optional<IqFrame> dir = mrpp_direction(surrogate, r_ref, h_at);
  if (!dir) return no_attack(r_ref.size());
  Perturbation p;
  p.epsilon_used = std::sqrt(p_max);
  p.delta = scale(*dir, -p.epsilon_used);
  p.attacked = true;
  return p;
}

// Bisects the perturbation amplitude in [0, sqrt(p_max)] for the smallest
// value whose predicted received input x_adv = r_ref - eps * (h_at o dir)
// flips the surrogate to Noise; stops once the bracket is eps_acc wide and
// transmits at the surviving upper bound. If nothing flips, the full budget
// is spent. The literal_search flag reproduces the published pseudocode
// instead (branches inverted, so the bracket chases the largest
// non-flipping amplitude; the final assignment eps = eps_max is shared).
template <SurrogateClassifier S>
Perturbation craft_power_search(const S& surrogate, const IqFrame& r_ref,
                                const ChannelRealization& h_at,
                                const AttackSpec& spec) {
  validate(spec);
  if (spec.power_rule != PowerRule::SurrogateSearch)
    throw std::invalid_argument("craft_power_search: wrong power rule");
  const std::optional<IqFrame> dir = mrpp_direction(surrogate, r_ref, h_at);
  if (!dir) return no_attack(r_ref.size());

  const IqFrame h_dir = apply(h_at, *dir);
  IqFrame x_adv;
  x_adv.samples.resize(r_ref.size());
  double eps_min = 0.0;
  double eps_max = std::sqrt(spec.p_max);
  Perturbation p;
  while (eps_max - eps_min > spec.eps_acc) {
    const double eps_avg = 0.5 * (eps_min + eps_max);
    for (std::size_t i = 0; i < r_ref.size(); ++i)
      x_adv.samples[i] = r_ref[i] - eps_avg * h_dir[i];
    const bool flipped = classify(surrogate, x_adv) == ClassLabel::Noise;
    if (flipped) p.flip_found = true;
    if (flipped != spec.literal_search) {
      eps_max = eps_avg;
    } else {
      eps_min = eps_avg;
    }
    ++p.search_iterations;
  }
  p.epsilon_used = eps_max;
  p.delta = scale(*dir, -p.epsilon_used);
  p.attacked = true;
  return p;
}

// Full attack decision: gate on the surrogate's view of the air (attack only
// when r_ba reads as Signal), pick the crafting input per input_source, then
// apply the power rule. Pure function of its arguments.
template <SurrogateClassifier S>
Perturbation craft(const AttackSpec& spec, const S& surrogate, const IqFrame& r_bt,
                   const IqFrame& r_ba, const ChannelRealization& h_at) {
  validate(spec);
  if (r_bt.size() != r_ba.size())
    throw std::invalid_argument("craft: frame length mismatch");
  const ClassLabel heard = classify(surrogate, r_ba);
  const ClassLabel gate = spec.literal_search ? ClassLabel::Noise : ClassLabel::Signal;
  if (heard != gate) return no_attack(r_bt.size());
  const IqFrame& r_ref =
      spec.input_source == InputSource::TransmitterInput ? r_bt : r_ba;
  if (spec.power_rule == PowerRule::MaxBudget)
    return craft_max_power(surrogate, r_ref, h_at, spec.p_max);
  return craft_power_search(surrogate, r_ref, h_at, spec);
}

}  // namespace otasim
