#include <cmath>
#include <limits>
#include <set>
#include <utility>

#include <gtest/gtest.h>

#include "otasim/rng.hpp"
#include "otasim/signal.hpp"

using namespace otasim;

TEST(rng, deterministic_and_path_sensitive) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
  }
  EXPECT_EQ(derive_seed(7, {1, 2, 3}), derive_seed(7, {1, 2, 3}));
  EXPECT_NE(derive_seed(7, {1, 2, 3}), derive_seed(7, {3, 2, 1}));
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {1, 2, 0}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
}

TEST(rng, unit_draws_stay_in_half_open_interval) {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.next_unit();
    EXPECT_GT(u, 0.0);
    EXPECT_LE(u, 1.0);
  }
}

TEST(rng, gaussian_moments) {
  Rng rng(3);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    sum += g;
    sum_sq += g * g;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sum_sq / n, 1.0, 0.02);
}

TEST(rng, next_below_covers_range) {
  Rng rng(9);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t v = rng.next_below(7);
    EXPECT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(decibel, matches_reference_values) {
  EXPECT_NEAR(db(2.0), 3.010299956639812, 1e-12);
  EXPECT_NEAR(db(0.5), -3.010299956639812, 1e-12);
  EXPECT_DOUBLE_EQ(db(10.0), 10.0);
  EXPECT_NEAR(from_db(3.0), 1.9952623149688795, 1e-12);
  EXPECT_DOUBLE_EQ(from_db(-10.0), 0.1);
  EXPECT_DOUBLE_EQ(from_db(0.0), 1.0);
  EXPECT_NEAR(from_db(db(7.25)), 7.25, 1e-12);
  EXPECT_THROW(db(0.0), std::invalid_argument);
  EXPECT_THROW(db(-1.0), std::invalid_argument);
}

TEST(frame_power, hand_computed_value) {
  IqFrame f(2);
  f[0] = cplx{3.0, 0.0};
  f[1] = cplx{0.0, 4.0};
  EXPECT_DOUBLE_EQ(frame_power(f), 25.0);
  EXPECT_DOUBLE_EQ(frame_power(IqFrame(5)), 0.0);
}

TEST(qpsk, symbols_sit_on_the_constellation) {
  Rng rng(11);
  const double es = 2.0;
  const double a = std::sqrt(es / 2.0);
  const IqFrame f = qpsk_frame(64, es, rng);
  ASSERT_EQ(f.size(), 64u);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_DOUBLE_EQ(std::abs(f[i].real()), a);
    EXPECT_DOUBLE_EQ(std::abs(f[i].imag()), a);
  }
  EXPECT_NEAR(frame_power(f), 64 * es, 1e-12);
}

TEST(qpsk, all_four_symbols_appear) {
  Rng rng(12);
  const IqFrame f = qpsk_frame(256, 1.0, rng);
  std::set<std::pair<bool, bool>> corners;
  for (std::size_t i = 0; i < f.size(); ++i)
    corners.insert({f[i].real() > 0.0, f[i].imag() > 0.0});
  EXPECT_EQ(corners.size(), 4u);
}

TEST(qpsk, rejects_bad_arguments) {
  Rng rng(1);
  EXPECT_THROW(qpsk_frame(0, 1.0, rng), std::invalid_argument);
  EXPECT_THROW(qpsk_frame(8, 0.0, rng), std::invalid_argument);
  EXPECT_THROW(qpsk_frame(8, -1.0, rng), std::invalid_argument);
}

TEST(awgn, zero_power_gives_silence) {
  Rng rng(5);
  const IqFrame f = awgn(16, 0.0, rng);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(f[i].real(), 0.0);
    EXPECT_EQ(f[i].imag(), 0.0);
  }
}

TEST(awgn, mean_power_matches_noise_power) {
  Rng rng(6);
  const double sigma_sq = 0.37;
  double total = 0.0;
  const int frames = 2000;
  for (int i = 0; i < frames; ++i) total += frame_power(awgn(16, sigma_sq, rng));
  EXPECT_NEAR(total / (frames * 16), sigma_sq, 0.01);
  EXPECT_THROW(awgn(4, -0.1, rng), std::invalid_argument);
}

TEST(awgn, same_seed_same_noise) {
  Rng a(7), b(7);
  const IqFrame fa = awgn(8, 1.0, a);
  const IqFrame fb = awgn(8, 1.0, b);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(fa[i], fb[i]);
}

TEST(real_view, roundtrip_is_exact) {
  Rng rng(8);
  const IqFrame f = qpsk_frame(16, 1.0, rng);
  const RealFrame m = to_real(f);
  ASSERT_EQ(m.cols, 16u);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(m.at(0, i), f[i].real());
    EXPECT_EQ(m.at(1, i), f[i].imag());
  }
  const IqFrame back = from_real(m);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(back[i], f[i]);
}

TEST(real_view, rejects_malformed_input) {
  RealFrame bad;
  bad.cols = 4;
  bad.data.assign(7, 0.0);  // not 2 x 4
  EXPECT_THROW(from_real(bad), std::invalid_argument);
  RealFrame nan(2);
  nan.data[1] = std::nan("");
  EXPECT_THROW(from_real(nan), std::invalid_argument);
}

TEST(frame_arithmetic, add_and_scale) {
  IqFrame a(2), b(2);
  a[0] = cplx{1.0, 2.0};
  a[1] = cplx{-1.0, 0.5};
  b[0] = cplx{0.5, -2.0};
  b[1] = cplx{2.0, 1.0};
  const IqFrame s = add(a, b);
  EXPECT_EQ(s[0], (cplx{1.5, 0.0}));
  EXPECT_EQ(s[1], (cplx{1.0, 1.5}));
  const IqFrame t = scale(a, -2.0);
  EXPECT_EQ(t[0], (cplx{-2.0, -4.0}));
  EXPECT_EQ(t[1], (cplx{2.0, -1.0}));
  EXPECT_THROW(add(a, IqFrame(3)), std::invalid_argument);
}

TEST(finiteness, detects_bad_entries) {
  IqFrame f(2);
  EXPECT_TRUE(is_finite(f));
  f[1] = cplx{0.0, std::numeric_limits<double>::infinity()};
  EXPECT_FALSE(is_finite(f));
}
