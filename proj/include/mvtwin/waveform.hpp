#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvtwin {

// Uniformly sampled signal; sample n sits at t0 + n/fs.
struct Waveform {
  double fs = 0.0;
  double t0 = 0.0;
  std::vector<double> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double time_at(std::size_t n) const { return t0 + static_cast<double>(n) / fs; }
  double t_end() const { return samples.empty() ? t0 : time_at(samples.size() - 1); }
};

// Half-open index range [first, last).
struct SampleRange {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t count() const { return last - first; }
};

inline SampleRange full_range(std::size_t n) { return {0, n}; }

inline void require_range(const SampleRange& r, std::size_t n) {
  if (r.first >= r.last || r.last > n)
    throw std::out_of_range("sample range [" + std::to_string(r.first) + ", " +
                            std::to_string(r.last) + ") invalid for length " + std::to_string(n));
}

inline double mean(std::span<const double> x, SampleRange r) {
  require_range(r, x.size());
  double s = 0.0;
  for (std::size_t n = r.first; n < r.last; ++n) s += x[n];
  return s / static_cast<double>(r.count());
}

inline double rms(std::span<const double> x, SampleRange r) {
  require_range(r, x.size());
  double s = 0.0;
  for (std::size_t n = r.first; n < r.last; ++n) s += x[n] * x[n];
  return std::sqrt(s / static_cast<double>(r.count()));
}

inline double rms(std::span<const double> x) { return rms(x, full_range(x.size())); }

// Mean of the instantaneous product; over integer cycles this is P.
inline double active_power(std::span<const double> u, std::span<const double> i, SampleRange r) {
  require_range(r, std::min(u.size(), i.size()));
  double s = 0.0;
  for (std::size_t n = r.first; n < r.last; ++n) s += u[n] * i[n];
  return s / static_cast<double>(r.count());
}

// Times (seconds from sample 0) of upward zero crossings, linearly
// interpolated between the bracketing samples.
inline std::vector<double> upward_crossings(std::span<const double> x, double fs, SampleRange r,
                                            std::size_t max_count = SIZE_MAX) {
  require_range(r, x.size());
  std::vector<double> t;
  for (std::size_t n = r.first; n + 1 < r.last && t.size() < max_count; ++n) {
    if (x[n] < 0.0 && x[n + 1] >= 0.0) {
      double frac = -x[n] / (x[n + 1] - x[n]);
      t.push_back((static_cast<double>(n) + frac) / fs);
    }
  }
  return t;
}

// Frequency from the span of `periods` consecutive periods: the time between
// the first and last of periods+1 upward crossings. Scale- and sign-invariant.
inline std::optional<double> frequency_over(std::span<const double> x, double fs, SampleRange r,
                                            int periods = 10) {
  if (periods <= 0) throw std::invalid_argument("frequency_over: periods must be positive");
  auto t = upward_crossings(x, fs, r, static_cast<std::size_t>(periods) + 1);
  if (t.size() < static_cast<std::size_t>(periods) + 1) return std::nullopt;
  return static_cast<double>(periods) / (t.back() - t.front());
}

// One frequency estimate per disjoint block of `periods` periods.
inline std::vector<double> frequency_blocks(std::span<const double> x, double fs, SampleRange r,
                                            int periods = 10) {
  if (periods <= 0) throw std::invalid_argument("frequency_blocks: periods must be positive");
  auto t = upward_crossings(x, fs, r);
  std::vector<double> f;
  const std::size_t p = static_cast<std::size_t>(periods);
  for (std::size_t k = 0; k + p < t.size(); k += p)
    f.push_back(static_cast<double>(periods) / (t[k + p] - t[k]));
  return f;
}

// Complex amplitude c of the tone at f: x(t) ~ Re(c e^{jwt}) gives back c.
// Rectangle rule over the range; exact for integer periods at bin frequency.
inline std::complex<double> tone_projection(std::span<const double> x, double fs, double f,
                                            SampleRange r) {
  require_range(r, x.size());
  const double w = 2.0 * std::numbers::pi * f / fs;
  std::complex<double> acc = 0.0;
  for (std::size_t n = r.first; n < r.last; ++n) {
    double ph = w * static_cast<double>(n - r.first);
    acc += x[n] * std::complex<double>(std::cos(ph), -std::sin(ph));
  }
  return 2.0 * acc / static_cast<double>(r.count());
}

// Fundamental-frequency reactive power over the largest whole number of
// periods that fits in the range. The fundamental is taken from the voltage
// zero crossings, falling back to f_hint when the range has too few.
inline double reactive_power(std::span<const double> u, std::span<const double> i, double fs,
                             SampleRange r, double f_hint) {
  require_range(r, std::min(u.size(), i.size()));
  double f = f_hint;
  auto t = upward_crossings(u, fs, r);
  if (t.size() >= 2) f = static_cast<double>(t.size() - 1) / (t.back() - t.front());
  const double span_s = static_cast<double>(r.count()) / fs;
  const double whole = std::max(1.0, std::floor(span_s * f));
  auto len = static_cast<std::size_t>(std::llround(whole * fs / f));
  len = std::min(len, r.count());
  SampleRange rr{r.first, r.first + len};
  auto cu = tone_projection(u, fs, f, rr);
  auto ci = tone_projection(i, fs, f, rr);
  return std::imag(cu * std::conj(ci)) / 2.0;
}

// Trailing one-cycle mean of u*i per sample. Samples before the first full
// cycle repeat the first defined value so the output aligns with its inputs.
inline std::vector<double> sliding_active_power(std::span<const double> u,
                                                std::span<const double> i, double fs, double f0) {
  const std::size_t n = std::min(u.size(), i.size());
  const auto win = static_cast<std::size_t>(std::llround(fs / f0));
  if (win == 0 || win > n) throw std::invalid_argument("sliding_active_power: window exceeds record");
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + u[k] * i[k];
  std::vector<double> p(n);
  for (std::size_t k = win - 1; k < n; ++k)
    p[k] = (prefix[k + 1] - prefix[k + 1 - win]) / static_cast<double>(win);
  std::fill(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(win - 1), p[win - 1]);
  return p;
}

// Trailing one-cycle fundamental reactive power per sample: sliding
// single-bin projection at f0, recomputed from scratch every cycle to stop
// recursion drift.
inline std::vector<double> sliding_reactive_power(std::span<const double> u,
                                                  std::span<const double> i, double fs, double f0) {
  const std::size_t n = std::min(u.size(), i.size());
  const auto win = static_cast<std::size_t>(std::llround(fs / f0));
  if (win == 0 || win > n) throw std::invalid_argument("sliding_reactive_power: window exceeds record");
  const double w = 2.0 * std::numbers::pi * f0 / fs;
  std::vector<std::complex<double>> rot(n);
  for (std::size_t k = 0; k < n; ++k) {
    double ph = w * static_cast<double>(k);
    rot[k] = std::complex<double>(std::cos(ph), -std::sin(ph));
  }
  auto window_sum = [&](std::span<const double> x, std::size_t end_incl) {
    std::complex<double> s = 0.0;
    for (std::size_t k = end_incl + 1 - win; k <= end_incl; ++k) s += x[k] * rot[k];
    return s;
  };
  std::vector<double> q(n);
  std::complex<double> su = 0.0, si = 0.0;
  for (std::size_t k = win - 1; k < n; ++k) {
    if ((k - (win - 1)) % win == 0) {
      su = window_sum(u, k);
      si = window_sum(i, k);
    } else {
      su += u[k] * rot[k] - u[k - win] * rot[k - win];
      si += i[k] * rot[k] - i[k - win] * rot[k - win];
    }
    const double scale = 2.0 / static_cast<double>(win);
    q[k] = std::imag((scale * su) * std::conj(scale * si)) / 2.0;
  }
  std::fill(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(win - 1), q[win - 1]);
  return q;
}

// Linear interpolation at time t; clamps to the end samples.
inline double sample_linear(const Waveform& src, double t) {
  const double pos = (t - src.t0) * src.fs;
  if (pos <= 0.0) return src.samples.front();
  const auto last = static_cast<double>(src.samples.size() - 1);
  if (pos >= last) return src.samples.back();
  const auto k = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(k);
  return src.samples[k] + frac * (src.samples[k + 1] - src.samples[k]);
}

inline Waveform resample_linear(const Waveform& src, double fs, double t_start, std::size_t n) {
  Waveform out;
  out.fs = fs;
  out.t0 = t_start;
  out.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    out.samples[k] = sample_linear(src, t_start + static_cast<double>(k) / fs);
  return out;
}

}  // namespace mvtwin
