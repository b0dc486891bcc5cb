#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "otasim/rng.hpp"

namespace otasim {

using cplx = std::complex<double>;

// One frame of k complex baseband samples, the unit of classification.
struct IqFrame {
  std::vector<cplx> samples;

  IqFrame() = default;
  explicit IqFrame(std::size_t k) : samples(k, cplx{0.0, 0.0}) {}
  explicit IqFrame(std::vector<cplx> s) : samples(std::move(s)) {}

  std::size_t size() const { return samples.size(); }
  cplx& operator[](std::size_t i) { return samples[i]; }
  const cplx& operator[](std::size_t i) const { return samples[i]; }
};

enum class ClassLabel { Signal, Noise };

struct LabeledFrame {
  IqFrame frame;
  ClassLabel label;
};

// 2 x k real view of a frame: row 0 carries in-phase, row 1 quadrature.
struct RealFrame {
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, 2 rows

  RealFrame() = default;
  explicit RealFrame(std::size_t k) : cols(k), data(2 * k, 0.0) {}

  double& at(std::size_t row, std::size_t col) { return data[row * cols + col]; }
  double at(std::size_t row, std::size_t col) const { return data[row * cols + col]; }
};

inline bool is_finite(const IqFrame& f) {
  for (const cplx& s : f.samples)
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return false;
  return true;
}

inline bool is_finite(const RealFrame& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

// QPSK frame: each sample drawn uniformly from {(+-1 +- j) * sqrt(Es/2)}.
inline IqFrame qpsk_frame(std::size_t k, double symbol_energy, Rng& rng) {
  if (k == 0) throw std::invalid_argument("qpsk_frame: k must be >= 1");
  if (!(symbol_energy > 0.0))
    throw std::invalid_argument("qpsk_frame: symbol_energy must be > 0");
  const double a = std::sqrt(symbol_energy / 2.0);
  IqFrame f(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t bits = rng.next_u64();
    f[i] = cplx{(bits & 1u) ? a : -a, (bits & 2u) ? a : -a};
  }
  return f;
}

// Circularly-symmetric complex Gaussian noise, per-sample variance
// noise_power split equally across I and Q.
inline IqFrame awgn(std::size_t k, double noise_power, Rng& rng) {
  if (noise_power < 0.0)
    throw std::invalid_argument("awgn: noise_power must be >= 0");
  const double s = std::sqrt(noise_power / 2.0);
  IqFrame f(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto [g1, g2] = rng.next_gaussian_pair();
    f[i] = cplx{s * g1, s * g2};
  }
  return f;
}

// Squared l2 norm, sum_i |f_i|^2.
inline double frame_power(const IqFrame& f) {
  double p = 0.0;
  for (const cplx& s : f.samples) p += std::norm(s);
  return p;
}

inline double db(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("db: argument must be > 0");
  return 10.0 * std::log10(x);
}

inline double from_db(double x_db) { return std::pow(10.0, x_db / 10.0); }

inline RealFrame to_real(const IqFrame& f) {
  RealFrame m(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    m.at(0, i) = f[i].real();
    m.at(1, i) = f[i].imag();
  }
  return m;
}

inline IqFrame from_real(const RealFrame& m) {
  if (m.data.size() != 2 * m.cols)
    throw std::invalid_argument("from_real: matrix must be 2 x k");
  IqFrame f(m.cols);
  for (std::size_t i = 0; i < m.cols; ++i) f[i] = cplx{m.at(0, i), m.at(1, i)};
  if (!is_finite(f)) throw std::invalid_argument("from_real: non-finite entry");
  return f;
}

inline IqFrame add(const IqFrame& a, const IqFrame& b) {
  if (a.size() != b.size()) throw std::invalid_argument("add: length mismatch");
  IqFrame out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline IqFrame scale(const IqFrame& f, double c) {
  IqFrame out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = c * f[i];
  return out;
}

}  // namespace otasim
