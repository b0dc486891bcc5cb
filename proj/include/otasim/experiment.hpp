#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "otasim/attack.hpp"
#include "otasim/channel.hpp"
#include "otasim/neuralnet.hpp"
#include "otasim/rng.hpp"
#include "otasim/signal.hpp"

namespace otasim {

// All QPSK frames use unit symbol energy; operating SNR is set through
// noise_power instead.
inline constexpr double kSymbolEnergy = 1.0;

struct ScenarioConfig {
  Topology topology;
  FadingParams fading;
  double noise_power = 0.1;  // sigma^2 per received sample
  std::size_t train_frames = 10000;
  std::size_t test_trials = 2000;
  ArchSpec arch_t;  // transmitter (target) classifier
  ArchSpec arch_a;  // adversary (surrogate) classifier
  TrainConfig train_cfg;
  AttackSpec attack;
  std::vector<double> pnr_grid_db;
  std::uint64_t master_seed = 1;
};

inline ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.topology.d_bt = 1.0;
  cfg.topology.d_ba = 0.5;
  cfg.topology.d_ta = 0.5;
  for (int p = -10; p <= 15; ++p) cfg.pnr_grid_db.push_back(static_cast<double>(p));
  return cfg;
}

inline void validate(const ScenarioConfig& cfg) {
  validate(cfg.topology);
  validate(cfg.fading);
  validate(cfg.arch_t);
  validate(cfg.arch_a);
  validate(cfg.train_cfg);
  if (!(cfg.noise_power > 0.0))
    throw std::invalid_argument("scenario: noise_power must be > 0");
  if (cfg.train_frames == 0 || cfg.test_trials == 0)
    throw std::invalid_argument("scenario: counts must be positive");
  if (cfg.arch_t.input_len != cfg.arch_a.input_len)
    throw std::invalid_argument("scenario: classifier input lengths must match");
  if (cfg.pnr_grid_db.empty())
    throw std::invalid_argument("scenario: pnr_grid_db must be nonempty");
  for (std::size_t i = 0; i < cfg.pnr_grid_db.size(); ++i) {
    if (!std::isfinite(cfg.pnr_grid_db[i]))
      throw std::invalid_argument("scenario: pnr_grid_db must be finite");
    if (i > 0 && !(cfg.pnr_grid_db[i] > cfg.pnr_grid_db[i - 1]))
      throw std::invalid_argument("scenario: pnr_grid_db must be strictly increasing");
  }
  if (!(cfg.attack.eps_acc > 0.0) || !std::isfinite(cfg.attack.eps_acc))
    throw std::invalid_argument("scenario: attack.eps_acc must be > 0");
  const double min_budget = from_db(cfg.pnr_grid_db.front()) *
                            static_cast<double>(cfg.arch_t.input_len) *
                            cfg.noise_power;
  if (!(cfg.attack.eps_acc < std::sqrt(min_budget)))
    throw std::invalid_argument(
        "scenario: attack.eps_acc must be finer than the smallest grid budget");
}

struct CurvePoint {
  double pnr_db = 0.0;
  double success_rate = 0.0;
  double standard_error = 0.0;  // sqrt(p (1-p) / n)
  std::size_t n_trials = 0;
};

struct TableMeta {
  std::uint64_t master_seed = 0;
  double target_val_accuracy = 0.0;
  double surrogate_val_accuracy = 0.0;
  std::size_t budget_violations = 0;  // transmitted deltas exceeding the budget
  std::size_t total_trials = 0;
};

struct ResultTable {
  std::string scenario;
  std::vector<CurvePoint> points;
  TableMeta meta;
};

namespace detail {
inline constexpr std::uint64_t kDatasetStream = 21;
inline constexpr std::uint64_t kTrainStream = 22;
inline constexpr std::uint64_t kTrialStream = 23;
inline constexpr std::uint64_t kRoleTarget = 0;
inline constexpr std::uint64_t kRoleAdversary = 1;

inline std::uint64_t bits(double d) { return std::bit_cast<std::uint64_t>(d); }

inline std::uint64_t fold(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL));
}
}  // namespace detail

// Stable identity of a network architecture, used in seed-derivation paths
// and model-cache keys.
inline std::uint64_t arch_tag(const ArchSpec& a) {
  std::uint64_t h = detail::fold(0x41524348u, a.input_len);
  h = detail::fold(h, a.conv_filters);
  h = detail::fold(h, a.conv_kernel_w);
  for (std::size_t w : a.hidden_layers) h = detail::fold(h, w);
  return detail::fold(h, detail::bits(a.dropout_rate));
}

// Stable identity of the node geometry (distances only). Trial randomness is
// keyed on this, so scenarios sharing a topology face identical channel and
// noise draws and differ only through the attack under test.
inline std::uint64_t topology_tag(const Topology& t) {
  std::uint64_t h = detail::fold(0x544f504fu, detail::bits(t.d_bt));
  h = detail::fold(h, detail::bits(t.d_ba));
  return detail::fold(h, detail::bits(t.d_ta));
}

// Balanced two-class dataset as seen by a receiver at distance d: half the
// frames carry the faded QPSK emission plus noise (Signal), half are noise
// alone (Noise). Fresh channel and shadowing per frame; order shuffled.
inline std::vector<LabeledFrame> build_dataset(double d, std::size_t n,
                                               std::size_t k, double noise_power,
                                               const FadingParams& fading,
                                               Rng& rng) {
  if (n == 0 || n % 2 != 0)
    throw std::invalid_argument("build_dataset: n must be positive and even");
  std::vector<LabeledFrame> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n / 2; ++i) {
    const ChannelRealization h = sample_channel(fading, d, k, rng);
    const IqFrame x = qpsk_frame(k, kSymbolEnergy, rng);
    out.push_back({receive(h, x, noise_power, rng), ClassLabel::Signal});
  }
  for (std::size_t i = 0; i < n / 2; ++i)
    out.push_back({awgn(k, noise_power, rng), ClassLabel::Noise});
  for (std::size_t i = n; i > 1; --i)
    std::swap(out[i - 1], out[rng.next_below(i)]);
  return out;
}

// Trains the classifier a node at distance d would own, with data and
// training seeds derived from the scenario master seed. The dataset seed is
// independent of the architecture, so same-location surrogates of different
// depths learn from identical frames.
inline Model train_node(const ScenarioConfig& cfg, std::uint64_t role, double d,
                        const ArchSpec& arch) {
  Rng data_rng =
      derive_rng(cfg.master_seed, {detail::kDatasetStream, role, detail::bits(d)});
  const std::vector<LabeledFrame> data = build_dataset(
      d, cfg.train_frames, arch.input_len, cfg.noise_power, cfg.fading, data_rng);
  TrainConfig tc = cfg.train_cfg;
  tc.seed = derive_seed(cfg.master_seed,
                        {detail::kTrainStream, role, detail::bits(d), arch_tag(arch)});
  return train(data, arch, tc);
}

// (target, surrogate) pair for the configured topology.
inline std::pair<Model, Model> train_pair(const ScenarioConfig& cfg) {
  validate(cfg);
  Model t = train_node(cfg, detail::kRoleTarget, cfg.topology.d_bt, cfg.arch_t);
  Model a = train_node(cfg, detail::kRoleAdversary, cfg.topology.d_ba, cfg.arch_a);
  return {std::move(t), std::move(a)};
}

// Perturbation power budget for a PNR point: the ratio is taken between the
// transmitted perturbation power ||delta||^2 and the total receiver noise
// power over a frame, k * sigma^2.
inline double p_max_from_pnr(double pnr_db, double noise_power, std::size_t k) {
  if (!(noise_power > 0.0))
    throw std::invalid_argument("p_max_from_pnr: noise_power must be > 0");
  if (k == 0) throw std::invalid_argument("p_max_from_pnr: k must be >= 1");
  return from_db(pnr_db) * static_cast<double>(k) * noise_power;
}

struct TrialOutcome {
  bool attacked = false;
  bool fooled = false;
  bool budget_ok = true;
  ClassLabel target_pre_label = ClassLabel::Noise;
  ClassLabel surrogate_label = ClassLabel::Noise;
  double delta_power = 0.0;
};

// One occupied-channel Monte Carlo trial: draw the three channels, the QPSK
// frame and receiver noise, let the adversary craft its perturbation from
// what it can observe, then ask the target to classify the perturbed
// reception. The clean reception reuses the same noise draw, so delta = 0
// reduces exactly to the unattacked link.
template <SurrogateClassifier S>
TrialOutcome run_trial(const Model& model_t, const S& model_a,
                       const ScenarioConfig& cfg, double pnr_db, Rng& rng) {
  const std::size_t k = cfg.arch_t.input_len;
  const ChannelRealization h_bt = sample_channel(cfg.fading, cfg.topology.d_bt, k, rng);
  const ChannelRealization h_ba = sample_channel(cfg.fading, cfg.topology.d_ba, k, rng);
  const ChannelRealization h_at = sample_channel(cfg.fading, cfg.topology.d_ta, k, rng);
  const IqFrame x = qpsk_frame(k, kSymbolEnergy, rng);
  const IqFrame r_bt = receive(h_bt, x, cfg.noise_power, rng);
  const IqFrame r_ba = receive(h_ba, x, cfg.noise_power, rng);

  AttackSpec spec = cfg.attack;
  spec.p_max = p_max_from_pnr(pnr_db, cfg.noise_power, k);
  const Perturbation pert = craft(spec, model_a, r_bt, r_ba, h_at);

  TrialOutcome o;
  o.attacked = pert.attacked;
  o.surrogate_label = classify(model_a, r_ba);
  o.target_pre_label = classify(model_t, r_bt);
  o.delta_power = frame_power(pert.delta);
  o.budget_ok = o.delta_power <= spec.p_max + 1e-9;
  const IqFrame r_adv = add(r_bt, apply(h_at, pert.delta));
  o.fooled = classify(model_t, r_adv) == ClassLabel::Noise;
  return o;
}

// Success curve over the PNR grid for a fixed (target, surrogate) pair.
// Trial RNG streams are keyed on (master seed, topology, point, trial), so
// any worker count and schedule produces identical counts.
template <SurrogateClassifier S>
ResultTable curve_with_models(const Model& model_t, const S& model_a,
                              const ScenarioConfig& cfg, std::string label,
                              std::size_t jobs = 1) {
  validate(cfg);
  if (jobs == 0) throw std::invalid_argument("curve: jobs must be >= 1");
  ResultTable table;
  table.scenario = std::move(label);
  table.meta.master_seed = cfg.master_seed;
  const std::uint64_t topo = topology_tag(cfg.topology);
  const std::size_t n = cfg.test_trials;

  struct Counts {
    std::size_t fooled = 0;
    std::size_t violations = 0;
  };
  for (std::size_t i = 0; i < cfg.pnr_grid_db.size(); ++i) {
    const double pnr_db = cfg.pnr_grid_db[i];
    std::vector<Counts> parts(jobs);
    std::vector<std::exception_ptr> errors(jobs);
    auto work = [&](std::size_t w) {
      try {
        for (std::size_t t = w; t < n; t += jobs) {
          Rng rng = derive_rng(cfg.master_seed, {detail::kTrialStream, topo, i, t});
          const TrialOutcome o = run_trial(model_t, model_a, cfg, pnr_db, rng);
          parts[w].fooled += o.fooled ? 1 : 0;
          parts[w].violations += o.budget_ok ? 0 : 1;
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (jobs == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(jobs);
      for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(work, w);
      for (std::thread& th : pool) th.join();
    }
    std::size_t fooled = 0;
    for (std::size_t w = 0; w < jobs; ++w) {
      if (errors[w]) std::rethrow_exception(errors[w]);
      fooled += parts[w].fooled;
      table.meta.budget_violations += parts[w].violations;
    }
    CurvePoint pt;
    pt.pnr_db = pnr_db;
    pt.n_trials = n;
    pt.success_rate = static_cast<double>(fooled) / static_cast<double>(n);
    pt.standard_error =
        std::sqrt(pt.success_rate * (1.0 - pt.success_rate) / static_cast<double>(n));
    table.points.push_back(pt);
    table.meta.total_trials += n;
  }
  return table;
}

// Trains the configured pair, then sweeps the curve.
inline ResultTable attack_success_curve(const ScenarioConfig& cfg,
                                        std::size_t jobs = 1) {
  auto [model_t, model_a] = train_pair(cfg);
  const std::string label =
      cfg.topology.label.empty() ? std::string("scenario") : cfg.topology.label;
  ResultTable t = curve_with_models(model_t, model_a, cfg, label, jobs);
  t.meta.target_val_accuracy = model_t.meta.val_accuracy;
  t.meta.surrogate_val_accuracy = model_a.meta.val_accuracy;
  return t;
}

enum class Figure { FixDba, FixDta, Methods, Arch };

// Memoizes trained models by (role, location, architecture) so curve sets
// that revisit a node reuse one training run. Seeding matches train_node,
// so cached and freshly trained models are bit-identical.
class ModelCache {
 public:
  explicit ModelCache(const ScenarioConfig& base) : base_(base) { validate(base_); }

  const Model& target() {
    return get(detail::kRoleTarget, base_.topology.d_bt, base_.arch_t);
  }
  const Model& surrogate(double d_ba, const ArchSpec& arch) {
    return get(detail::kRoleAdversary, d_ba, arch);
  }
  const ScenarioConfig& base() const { return base_; }

 private:
  const Model& get(std::uint64_t role, double d, const ArchSpec& arch) {
    const auto key = std::make_tuple(role, detail::bits(d), arch_tag(arch));
    auto it = cache_.find(key);
    if (it == cache_.end())
      it = cache_.emplace(key, train_node(base_, role, d, arch)).first;
    return it->second;
  }

  ScenarioConfig base_;
  std::map<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>, Model> cache_;
};

namespace detail {

inline std::string dist_label(const char* name, double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%g", name, d);
  return buf;
}

inline std::string arch_label(const ArchSpec& a) {
  std::string s = "arch=";
  for (std::size_t i = 0; i < a.hidden_layers.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(a.hidden_layers[i]);
  }
  return s;
}

}  // namespace detail

// Curve families behind the four result figures. The adversary's distance
// grid is {0.5, 1, sqrt(1.25), 1.5}.
//
//   FixDba  — adversary fixed near the emitter (d_ba = 0.5), transmitter
//             distance d_ta swept; plus the white-box upper bound (surrogate
//             = target, minimal-power search) at the closest location.
//   FixDta  — transmitter distance fixed (d_ta = 0.5), d_ba swept with one
//             surrogate per location.
//   Methods — budget spending rules compared at the base topology:
//             max-power, surrogate search, and the search crafted on the
//             adversary's own reception.
//   Arch    — surrogate depth swept (1, 2, 3 hidden layers) at the base
//             topology.
//
// An external cache lets several figures share one set of trained models;
// results are identical with or without it.
inline std::vector<ResultTable> reproduce(Figure fig, const ScenarioConfig& base,
                                          std::size_t jobs = 1,
                                          ModelCache* shared_cache = nullptr) {
  validate(base);
  ModelCache local_cache(base);
  ModelCache& cache = shared_cache ? *shared_cache : local_cache;
  const double kDistances[4] = {0.5, 1.0, std::sqrt(1.25), 1.5};
  std::vector<ResultTable> out;

  auto emit = [&](const Model& model_t, const Model& model_a, ScenarioConfig cfg,
                  std::string label) {
    cfg.topology.label = label;
    ResultTable t = curve_with_models(model_t, model_a, cfg, label, jobs);
    t.meta.target_val_accuracy = model_t.meta.val_accuracy;
    t.meta.surrogate_val_accuracy = model_a.meta.val_accuracy;
    out.push_back(std::move(t));
  };

  const Model& target = cache.target();
  switch (fig) {
    case Figure::FixDba: {
      const Model& sur = cache.surrogate(0.5, base.arch_a);
      for (double d_ta : kDistances) {
        ScenarioConfig cfg = base;
        cfg.topology.d_ba = 0.5;
        cfg.topology.d_ta = d_ta;
        emit(target, sur, cfg, detail::dist_label("d_ta", d_ta));
      }
      ScenarioConfig cfg = base;
      cfg.topology.d_ba = 0.5;
      cfg.topology.d_ta = 0.5;
      cfg.attack.power_rule = PowerRule::SurrogateSearch;
      cfg.attack.input_source = InputSource::TransmitterInput;
      emit(target, target, cfg, "upper-bound");
      break;
    }
    case Figure::FixDta: {
      for (double d_ba : kDistances) {
        const Model& sur = cache.surrogate(d_ba, base.arch_a);
        ScenarioConfig cfg = base;
        cfg.topology.d_ba = d_ba;
        cfg.topology.d_ta = 0.5;
        emit(target, sur, cfg, detail::dist_label("d_ba", d_ba));
      }
      break;
    }
    case Figure::Methods: {
      const Model& sur = cache.surrogate(base.topology.d_ba, base.arch_a);
      struct MethodSpec {
        const char* label;
        PowerRule rule;
        InputSource source;
      };
      const MethodSpec methods[3] = {
          {"max-power", PowerRule::MaxBudget, InputSource::TransmitterInput},
          {"surrogate-search", PowerRule::SurrogateSearch, InputSource::TransmitterInput},
          {"rba-search", PowerRule::SurrogateSearch, InputSource::AdversaryInput},
      };
      for (const MethodSpec& m : methods) {
        ScenarioConfig cfg = base;
        cfg.attack.power_rule = m.rule;
        cfg.attack.input_source = m.source;
        emit(target, sur, cfg, m.label);
      }
      break;
    }
    case Figure::Arch: {
      for (std::size_t depth = 1; depth <= 3; ++depth) {
        ArchSpec arch = base.arch_a;
        arch.hidden_layers.assign(depth, 64);
        const Model& sur = cache.surrogate(base.topology.d_ba, arch);
        emit(target, sur, base, detail::arch_label(arch));
      }
      break;
    }
  }
  return out;
}

inline const CurvePoint& peak_point(const ResultTable& t) {
  if (t.points.empty()) throw std::invalid_argument("peak: empty table");
  const CurvePoint* best = &t.points[0];
  for (const CurvePoint& p : t.points)
    if (p.success_rate > best->success_rate) best = &p;
  return *best;
}

inline double peak_pnr(const ResultTable& t) { return peak_point(t).pnr_db; }
inline double peak_success(const ResultTable& t) { return peak_point(t).success_rate; }

}  // namespace otasim
