#pragma once

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "otasim/attack.hpp"
#include "otasim/channel.hpp"
#include "otasim/experiment.hpp"
#include "otasim/neuralnet.hpp"
#include "otasim/rng.hpp"
#include "otasim/signal.hpp"

namespace otasim::verify {

// --- analytic fixture -------------------------------------------------------
//
// One-margin linear classifier: m(r) = c0 + sum_i Re(conj(a_i) r_i), read as
// the logit pair (m, 0). Signal iff m > 0, p_signal = sigmoid(m). Its loss
// gradient and its flip threshold under the power search are closed-form,
// which makes it an independent oracle for the attack code.
struct LinearSurrogate {
  std::vector<cplx> a;
  double c0 = 0.0;
};

inline double margin(const LinearSurrogate& s, const IqFrame& f) {
  double m = s.c0;
  for (std::size_t i = 0; i < f.size(); ++i)
    m += std::real(std::conj(s.a[i]) * f[i]);
  return m;
}

inline ClassLabel classify(const LinearSurrogate& s, const IqFrame& f) {
  return margin(s, f) > 0.0 ? ClassLabel::Signal : ClassLabel::Noise;
}

inline std::vector<cplx> input_gradient_frame(const LinearSurrogate& s,
                                              const IqFrame& f, ClassLabel target) {
  const double p = 1.0 / (1.0 + std::exp(-margin(s, f)));
  const double c = target == ClassLabel::Noise ? p : p - 1.0;
  std::vector<cplx> g(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) g[i] = c * s.a[i];
  return g;
}

// Against the margin model, the channel-weighted direction gives
// m(eps) = m(r) - eps * sqrt(W) with W = sum_i |h_i|^2 |a_i|^2, so the
// surrogate flips exactly at eps* = m(r) / sqrt(W).
inline double channel_weight(const LinearSurrogate& s, const ChannelRealization& h) {
  double w = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i)
    w += std::norm(h.gains[i]) * std::norm(s.a[i]);
  return w;
}

inline double flip_threshold(const LinearSurrogate& s, const IqFrame& r,
                             const ChannelRealization& h) {
  return margin(s, r) / std::sqrt(channel_weight(s, h));
}

// --- suite plumbing ---------------------------------------------------------

struct SuiteResult {
  std::string name;
  double seconds = 0.0;
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
};

namespace detail {

template <typename F>
SuiteResult timed_suite(std::string name, F&& body) {
  SuiteResult r;
  r.name = std::move(name);
  const auto t0 = std::chrono::steady_clock::now();
  body(r.failures);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline void failf(std::vector<std::string>& fails, const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  fails.emplace_back(buf);
}

inline ArchSpec small_arch() {
  ArchSpec a;
  a.conv_filters = 4;
  a.hidden_layers = {16};
  return a;
}

inline IqFrame random_frame(std::size_t k, Rng& rng) {
  IqFrame f(k);
  for (std::size_t i = 0; i < k; ++i)
    f[i] = cplx{rng.next_gaussian(), rng.next_gaussian()};
  return f;
}

inline ChannelRealization random_channel(std::size_t k, Rng& rng) {
  ChannelRealization h;
  h.gains.resize(k);
  for (std::size_t i = 0; i < k; ++i)
    h.gains[i] = cplx{rng.next_gaussian(), rng.next_gaussian()};
  return h;
}

}  // namespace detail

// Replaceable gradient hook so a deliberately corrupted gradient can be fed
// through the same checker as a negative control.
using InputGradFn =
    std::function<RealFrame(const Model&, const RealFrame&, ClassLabel)>;

// Analytic input gradients vs. central finite differences of the loss.
inline SuiteResult gradient_suite(std::uint64_t seed, std::size_t cases = 20,
                                  InputGradFn grad_fn = {}) {
  if (!grad_fn)
    grad_fn = [](const Model& m, const RealFrame& x, ClassLabel y) {
      return input_gradient(m, x, y).values;
    };
  return detail::timed_suite("gradient-vs-finite-difference", [&](auto& fails) {
    const ArchSpec arch = detail::small_arch();
    Rng rng = derive_rng(seed, {41});
    const double step = 1e-4;
    for (std::size_t c = 0; c < cases; ++c) {
      Model m = init_model(arch, rng);
      RealFrame x(arch.input_len);
      for (double& v : x.data) v = rng.next_gaussian();
      const ClassLabel y = c % 2 == 0 ? ClassLabel::Signal : ClassLabel::Noise;
      const RealFrame g = grad_fn(m, x, y);
      for (std::size_t j = 0; j < x.data.size(); ++j) {
        RealFrame xp = x, xm = x;
        xp.data[j] += step;
        xm.data[j] -= step;
        const double fd = (loss(m, xp, y) - loss(m, xm, y)) / (2.0 * step);
        const double tol = std::max(1e-5, 1e-3 * std::abs(g.data[j]));
        if (std::abs(g.data[j] - fd) > tol) {
          detail::failf(fails,
                        "case %zu coord %zu: analytic %.9g vs fd %.9g (tol %.3g, "
                        "seed %llu)",
                        c, j, g.data[j], fd, tol,
                        static_cast<unsigned long long>(seed));
        }
      }
    }
  });
}

// Direction normalization plus the scalar-channel phase-rotation identity.
inline SuiteResult direction_suite(std::uint64_t seed, std::size_t cases = 50) {
  return detail::timed_suite("mrpp-direction", [&](auto& fails) {
    const ArchSpec arch = detail::small_arch();
    Rng rng = derive_rng(seed, {42});
    for (std::size_t c = 0; c < cases; ++c) {
      Model m = init_model(arch, rng);
      const IqFrame r = detail::random_frame(arch.input_len, rng);
      const ChannelRealization h = detail::random_channel(arch.input_len, rng);
      const auto dir = mrpp_direction(m, r, h);
      if (!dir) {
        detail::failf(fails, "case %zu: unexpected degenerate direction (seed %llu)",
                      c, static_cast<unsigned long long>(seed));
        continue;
      }
      const double norm_err = std::abs(std::sqrt(frame_power(*dir)) - 1.0);
      if (norm_err > 1e-9)
        detail::failf(fails, "case %zu: direction norm off by %.3g (seed %llu)", c,
                      norm_err, static_cast<unsigned long long>(seed));

      // scalar channel c*I rotates the identity-channel direction by the
      // phase of conj(c)
      const cplx scalar{rng.next_gaussian(), rng.next_gaussian()};
      if (std::abs(scalar) < 1e-6) continue;
      ChannelRealization h_id, h_sc;
      h_id.gains.assign(arch.input_len, cplx{1.0, 0.0});
      h_sc.gains.assign(arch.input_len, scalar);
      const auto d_id = mrpp_direction(m, r, h_id);
      const auto d_sc = mrpp_direction(m, r, h_sc);
      if (!d_id || !d_sc) continue;
      const cplx rot = std::conj(scalar) / std::abs(scalar);
      for (std::size_t i = 0; i < arch.input_len; ++i) {
        if (std::abs((*d_sc)[i] - rot * (*d_id)[i]) > 1e-9) {
          detail::failf(fails,
                        "case %zu sample %zu: scalar-channel rotation violated "
                        "(seed %llu)",
                        c, i, static_cast<unsigned long long>(seed));
          break;
        }
      }
    }
  });
}

// Every crafted perturbation respects the power budget; max-power spends it.
inline SuiteResult budget_suite(std::uint64_t seed, std::size_t cases = 100) {
  return detail::timed_suite("power-budget", [&](auto& fails) {
    const ArchSpec arch = detail::small_arch();
    Rng rng = derive_rng(seed, {43});
    Model m = init_model(arch, rng);
    for (std::size_t c = 0; c < cases; ++c) {
      const IqFrame r_bt = detail::random_frame(arch.input_len, rng);
      const IqFrame r_ba = detail::random_frame(arch.input_len, rng);
      const ChannelRealization h = detail::random_channel(arch.input_len, rng);
      AttackSpec spec;
      spec.p_max = std::pow(10.0, 4.0 * rng.next_unit() - 3.0);  // 1e-3 .. 10
      spec.eps_acc = std::min(1e-3, std::sqrt(spec.p_max) / 8.0);
      spec.power_rule =
          rng.next_below(2) == 0 ? PowerRule::MaxBudget : PowerRule::SurrogateSearch;
      spec.input_source = rng.next_below(2) == 0 ? InputSource::TransmitterInput
                                                 : InputSource::AdversaryInput;
      const Perturbation p = craft(spec, m, r_bt, r_ba, h);
      const double power = frame_power(p.delta);
      if (power > spec.p_max + 1e-9)
        detail::failf(fails, "case %zu: ||delta||^2 %.9g over budget %.9g (seed %llu)",
                      c, power, spec.p_max, static_cast<unsigned long long>(seed));
      if (spec.power_rule == PowerRule::MaxBudget && p.attacked &&
          std::abs(power - spec.p_max) > 1e-9 + 1e-12 * spec.p_max)
        detail::failf(fails,
                      "case %zu: max-power ||delta||^2 %.9g != budget %.9g (seed %llu)",
                      c, power, spec.p_max, static_cast<unsigned long long>(seed));
    }
  });
}

// Power search vs. the linear model's closed-form flip threshold, including
// the exact bisection step count.
inline SuiteResult bisection_suite(std::uint64_t seed, std::size_t cases = 200) {
  return detail::timed_suite("bisection-oracle", [&](auto& fails) {
    const std::size_t k = 16;
    Rng rng = derive_rng(seed, {44});
    for (std::size_t c = 0; c < cases; ++c) {
      LinearSurrogate s;
      s.a.resize(k);
      for (cplx& v : s.a) v = cplx{rng.next_gaussian(), rng.next_gaussian()};
      const IqFrame r = detail::random_frame(k, rng);
      const ChannelRealization h = detail::random_channel(k, rng);
      AttackSpec spec;
      spec.power_rule = PowerRule::SurrogateSearch;
      spec.p_max = 0.25 + 3.75 * rng.next_unit();
      spec.eps_acc = 1e-3;
      const double log_ratio = std::log2(std::sqrt(spec.p_max) / spec.eps_acc);
      if (std::abs(log_ratio - std::round(log_ratio)) < 1e-6) continue;

      // place the flip threshold strictly inside (0, sqrt(p_max))
      const double eps_star = (0.1 + 0.8 * rng.next_unit()) * std::sqrt(spec.p_max);
      double dot = 0.0;
      for (std::size_t i = 0; i < k; ++i) dot += std::real(std::conj(s.a[i]) * r[i]);
      s.c0 = eps_star * std::sqrt(channel_weight(s, h)) - dot;

      const Perturbation p = craft_power_search(s, r, h, spec);
      if (!p.attacked || !p.flip_found) {
        detail::failf(fails, "case %zu: search reported no flip (seed %llu)", c,
                      static_cast<unsigned long long>(seed));
        continue;
      }
      if (std::abs(p.epsilon_used - eps_star) > spec.eps_acc)
        detail::failf(fails,
                      "case %zu: eps_final %.9g vs analytic %.9g, acc %.3g (seed %llu)",
                      c, p.epsilon_used, eps_star, spec.eps_acc,
                      static_cast<unsigned long long>(seed));
      const auto expected_iters =
          static_cast<std::size_t>(std::ceil(log_ratio));
      if (p.search_iterations != expected_iters)
        detail::failf(fails, "case %zu: %zu iterations, expected %zu (seed %llu)", c,
                      p.search_iterations, expected_iters,
                      static_cast<unsigned long long>(seed));
    }
  });
}

// End-to-end determinism at toy scale: identical reruns and identical
// results under different worker counts.
inline SuiteResult determinism_suite(std::uint64_t seed) {
  return detail::timed_suite("determinism", [&](auto& fails) {
    ScenarioConfig cfg = default_scenario();
    cfg.master_seed = seed;
    cfg.arch_t = detail::small_arch();
    cfg.arch_a = detail::small_arch();
    cfg.arch_a.hidden_layers = {8};
    cfg.train_frames = 128;
    cfg.test_trials = 40;
    cfg.train_cfg.epochs = 2;
    cfg.train_cfg.batch_size = 32;
    cfg.pnr_grid_db = {-5.0, 5.0};

    const ResultTable t1 = attack_success_curve(cfg);
    const ResultTable t2 = attack_success_curve(cfg);
    for (std::size_t i = 0; i < t1.points.size(); ++i) {
      if (std::memcmp(&t1.points[i].success_rate, &t2.points[i].success_rate,
                      sizeof(double)) != 0)
        detail::failf(fails, "rerun diverged at point %zu (seed %llu)", i,
                      static_cast<unsigned long long>(seed));
    }

    const auto [model_t, model_a] = train_pair(cfg);
    const ResultTable serial = curve_with_models(model_t, model_a, cfg, "d", 1);
    const ResultTable parallel = curve_with_models(model_t, model_a, cfg, "d", 3);
    for (std::size_t i = 0; i < serial.points.size(); ++i) {
      if (std::memcmp(&serial.points[i].success_rate, &parallel.points[i].success_rate,
                      sizeof(double)) != 0)
        detail::failf(fails, "jobs=1 vs jobs=3 diverged at point %zu (seed %llu)", i,
                      static_cast<unsigned long long>(seed));
    }

    Model again = train_node(cfg, 0, cfg.topology.d_bt, cfg.arch_t);
    if (again.conv_w != model_t.conv_w)
      detail::failf(fails, "retrained model parameters diverged (seed %llu)",
                    static_cast<unsigned long long>(seed));
  });
}

inline std::vector<SuiteResult> run_all(std::uint64_t seed) {
  return {gradient_suite(seed), direction_suite(seed), budget_suite(seed),
          bisection_suite(seed), determinism_suite(seed)};
}

inline bool print_report(const std::vector<SuiteResult>& results, std::ostream& os) {
  bool all = true;
  for (const SuiteResult& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "[%s] %-32s (%.3f s)",
                  r.passed() ? "PASS" : "FAIL", r.name.c_str(), r.seconds);
    os << line << "\n";
    std::size_t shown = 0;
    for (const std::string& f : r.failures) {
      if (shown++ == 10) {
        os << "    ... and " << r.failures.size() - 10 << " more\n";
        break;
      }
      os << "    " << f << "\n";
    }
    all = all && r.passed();
  }
  os << (all ? "all verification suites passed" : "verification FAILED") << "\n";
  return all;
}

}  // namespace otasim::verify
