#pragma once

// Counter-based pseudo random numbers (Philox4x64-10).
//
// Every variate in this project is addressed, not streamed: a draw is a pure
// function of (seed, domain, a, b, c, index). Encoder and decoder regenerate
// candidate #n of a reverse-channel step in O(1) without replaying anything,
// and Monte Carlo trials can be sharded across workers in any order.
//
// Determinism contract: uniforms are exact rational functions of the Philox
// output words. Normal and Exp(1) variates are produced by inverse-CDF
// (single uniform per variate), so the candidate index assignment never
// depends on rejection loops. The only libm calls involved are log1p (Exp)
// and sqrt/log inside the normal quantile; with round-to-nearest IEEE doubles
// these are deterministic for a fixed libm build, and encoder/decoder always
// share one process in this artifact.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace rdpflow::rng {

namespace detail {

inline constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
inline constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
inline constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace detail

using Block = std::array<std::uint64_t, 4>;

// Philox4x64, 10 rounds (Salmon et al. reference constants).
inline Block philox4x64(Block ctr, std::array<std::uint64_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    detail::mulhilo(detail::kPhiloxM0, ctr[0], hi0, lo0);
    detail::mulhilo(detail::kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += detail::kWeyl0;
    key[1] += detail::kWeyl1;
  }
  return ctr;
}

// Word -> uniform on the open interval (0,1); 53 significant bits, offset by
// half an ulp so 0 and 1 are unreachable (safe for inverse CDFs).
inline double to_unit_open(std::uint64_t w) {
  return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
}

// Normal quantile, Wichura's AS241 (PPND16). |relative error| < 1e-15 on
// (0,1); uses only rational arithmetic plus sqrt/log.
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inverse_normal_cdf: p outside (0,1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) *
                    r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) *
                    r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double v;
  if (r <= 5.0) {
    r -= 1.6;
    v = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) *
                 r +
             1.27045825245236838258e0) *
                r +
            3.64784832476320460504e0) *
               r +
           5.76949722146069140550e0) *
              r +
          4.63033784615654529590e0) *
             r +
         1.42343711074968357734e0) /
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) *
                 r +
             1.48103976427480074590e-1) *
                r +
            6.89767334985100004550e-1) *
               r +
           1.67638483018380384940e0) *
              r +
          2.05319162663775882187e0) *
             r +
         1.0);
  } else {
    r -= 5.0;
    v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) *
                 r +
             2.65321895265761230930e-2) *
                r +
            2.96560571828504891230e-1) *
               r +
           1.78482653991729133580e0) *
              r +
          5.46378491116411436990e0) *
             r +
         6.65790464350110377720e0) /
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) *
                 r +
             7.86869131145613259100e-4) *
                r +
            1.48753612908506148525e-2) *
               r +
           1.36929880922735805310e-1) *
              r +
          5.99832206555887937690e-1) *
             r +
         1.0);
  }
  return (q < 0.0) ? -v : v;
}

inline double to_normal(std::uint64_t w) { return inverse_normal_cdf(to_unit_open(w)); }
inline double to_exponential(std::uint64_t w) { return -std::log1p(-to_unit_open(w)); }

// Named sub-streams. Keeping these in the key (not the counter) means two
// domains never collide even at identical counter coordinates.
enum class Domain : std::uint64_t {
  kSourceSample = 0x01,
  kForwardNoise = 0x02,
  kChainInit = 0x03,
  kPfrWeight = 0x04,
  kPfrCandidate = 0x05,
  kTest = 0x7F,
};

// An addressable stream: (seed, domain) keys Philox, (a, b, c) occupy three
// counter words and the variate index occupies the fourth.
class Counter {
 public:
  Counter(std::uint64_t seed, Domain domain, std::uint64_t a = 0, std::uint64_t b = 0,
          std::uint64_t c = 0)
      : key_{seed, static_cast<std::uint64_t>(domain)}, a_(a), b_(b), c_(c) {}

  std::uint64_t word(std::uint64_t i) const {
    const Block out = philox4x64({a_, b_, c_, i >> 2}, key_);
    return out[i & 3];
  }

  double uniform(std::uint64_t i) const { return to_unit_open(word(i)); }
  double normal(std::uint64_t i) const { return to_normal(word(i)); }
  double exponential(std::uint64_t i) const { return to_exponential(word(i)); }

 private:
  std::array<std::uint64_t, 2> key_;
  std::uint64_t a_, b_, c_;
};

}  // namespace rdpflow::rng
