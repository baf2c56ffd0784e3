#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

#include "mvtwin/waveform.hpp"

namespace mvtwin {

// Both metrics normalise by the RMS of the reference over the same range, so
// they are invariant under common scaling and sign flips.
inline double avg_error(std::span<const double> dut, std::span<const double> ref, SampleRange r) {
  require_range(r, std::min(dut.size(), ref.size()));
  double num = 0.0, den = 0.0;
  for (std::size_t n = r.first; n < r.last; ++n) {
    const double d = dut[n] - ref[n];
    num += d * d;
    den += ref[n] * ref[n];
  }
  if (den == 0.0) throw std::invalid_argument("avg_error: reference has zero RMS");
  return std::sqrt(num / den);
}

inline double max_point_error(std::span<const double> dut, std::span<const double> ref,
                              SampleRange r) {
  require_range(r, std::min(dut.size(), ref.size()));
  double worst = 0.0, den = 0.0;
  for (std::size_t n = r.first; n < r.last; ++n) {
    worst = std::max(worst, std::abs(dut[n] - ref[n]));
    den += ref[n] * ref[n];
  }
  if (den == 0.0) throw std::invalid_argument("max_point_error: reference has zero RMS");
  return worst / std::sqrt(den / static_cast<double>(r.count()));
}

struct ErrorPair {
  double avg = 0.0;
  double max_point = 0.0;
};

inline ErrorPair signal_errors(std::span<const double> dut, std::span<const double> ref,
                               SampleRange r) {
  return {avg_error(dut, ref, r), max_point_error(dut, ref, r)};
}

// Sample window centred on an event, `cycles` fundamental cycles to each side.
inline SampleRange event_window(double fs, double event_time, std::size_t record_len,
                                int cycles = 2, double f0 = 50.0) {
  if (cycles <= 0) throw std::invalid_argument("event_window: cycles must be positive");
  const double half = static_cast<double>(cycles) / f0;
  const auto lo = std::llround((event_time - half) * fs);
  const auto hi = std::llround((event_time + half) * fs);
  if (lo < 0 || static_cast<std::size_t>(hi) > record_len)
    throw std::out_of_range("event_window: [" + std::to_string(lo) + ", " + std::to_string(hi) +
                            ") exceeds record of " + std::to_string(record_len));
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Comparisons against a reference carrying under 5% of its nameplate scale
// are dominated by the normalisation, not the estimate; they get flagged.
inline bool low_signal(double ref_rms, double nameplate_rms) {
  return ref_rms < 0.05 * nameplate_rms;
}

// One compared quantity within one trial. Per-phase slots are populated only
// where the quantity has phases; frequency rows carry a single value and no
// max-point metric.
struct QuantityErrors {
  std::array<ErrorPair, 3> phase{};
  std::array<bool, 3> phase_used{};
  std::array<bool, 3> phase_low_signal{};
  ErrorPair headline{};
  bool headline_low_signal = false;
  bool has_max_point = true;

  double worst_phase_avg() const {
    double w = 0.0;
    for (std::size_t k = 0; k < 3; ++k)
      if (phase_used[k]) w = std::max(w, phase[k].avg);
    return w;
  }
};

// Zero-crossing frequency estimates of the same record taken from both sides,
// compared block by block. Spans shorter than 21 fundamental periods fall
// back to a single block; an empty estimate flags the row instead of scoring.
inline QuantityErrors frequency_quality(std::span<const double> dut, std::span<const double> ref,
                                        double fs, SampleRange wnd, double f0) {
  QuantityErrors q;
  q.has_max_point = false;
  const double span_periods = static_cast<double>(wnd.count()) / fs * f0;
  int per = 10;
  if (span_periods < 21.0) per = std::max(4, static_cast<int>(span_periods) - 1);
  const auto fd = frequency_blocks(dut, fs, wnd, per);
  const auto fr = frequency_blocks(ref, fs, wnd, per);
  const std::size_t m = std::min(fd.size(), fr.size());
  if (m == 0) {
    q.headline_low_signal = true;
    return q;
  }
  double acc = 0.0;
  for (std::size_t b = 0; b < m; ++b) acc += std::abs(fd[b] - fr[b]) / fr[b];
  q.headline = {acc / static_cast<double>(m), 0.0};
  return q;
}

struct TrialErrors {
  QuantityErrors v_line;   // line-to-line voltages
  QuantityErrors v_phase;  // phase-voltage estimates
  QuantityErrors i_line;   // line currents
  QuantityErrors p;        // sliding-window active power, per phase
  QuantityErrors q;        // sliding-window reactive power, per phase
  QuantityErrors f_v;      // frequency tracked on a voltage channel
  QuantityErrors f_i;      // frequency tracked on a current channel
};

// Welford accumulator. Flagged values stay out of the mean and the confidence
// interval but still show up in max/min so outliers stay visible.
struct Stat {
  std::size_t n = 0;
  double mean_ = 0.0;
  double m2 = 0.0;
  double mx = -std::numeric_limits<double>::infinity();
  double mn = std::numeric_limits<double>::infinity();
  std::size_t n_all = 0;

  void add(double x, bool flagged = false) {
    ++n_all;
    mx = std::max(mx, x);
    mn = std::min(mn, x);
    if (flagged) return;
    ++n;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n);
    m2 += d * (x - mean_);
  }
  double mean() const { return n ? mean_ : std::numeric_limits<double>::quiet_NaN(); }
  double max() const { return n_all ? mx : std::numeric_limits<double>::quiet_NaN(); }
  double min() const { return n_all ? mn : std::numeric_limits<double>::quiet_NaN(); }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double ci_halfwidth(double z) const {
    if (n < 2) return std::numeric_limits<double>::infinity();
    return z * std::sqrt(variance() / static_cast<double>(n));
  }
};

struct QuantityStats {
  std::array<Stat, 3> phase_avg{};
  std::array<Stat, 3> phase_max{};
  std::array<bool, 3> phase_used{};
  Stat headline_avg;
  Stat headline_max;
  bool has_max_point = true;

  void add(const QuantityErrors& e) {
    has_max_point = e.has_max_point;
    for (std::size_t k = 0; k < 3; ++k) {
      if (!e.phase_used[k]) continue;
      phase_used[k] = true;
      phase_avg[k].add(e.phase[k].avg, e.phase_low_signal[k]);
      if (e.has_max_point) phase_max[k].add(e.phase[k].max_point, e.phase_low_signal[k]);
    }
    headline_avg.add(e.headline.avg, e.headline_low_signal);
    if (e.has_max_point) headline_max.add(e.headline.max_point, e.headline_low_signal);
  }

  // Relative-width stopping rule on the headline mean. The absolute floor
  // keeps near-zero metrics (a frequency row reading 1e-9) from demanding an
  // unbounded trial count from the relative test.
  bool converged(double z, double rel, double abs_floor = 0.0) const {
    if (headline_avg.n < 2) return false;
    const double hw = headline_avg.ci_halfwidth(z);
    return hw <= std::max(rel * std::abs(headline_avg.mean()), abs_floor);
  }
};

struct ScenarioStats {
  std::size_t trials = 0;
  QuantityStats v_line, v_phase, i_line, p, q, f_v, f_i;

  void add(const TrialErrors& t) {
    ++trials;
    v_line.add(t.v_line);
    v_phase.add(t.v_phase);
    i_line.add(t.i_line);
    p.add(t.p);
    q.add(t.q);
    f_v.add(t.f_v);
    f_i.add(t.f_i);
  }

  bool converged(double z, double rel, std::size_t min_trials, double abs_floor = 0.0) const {
    if (trials < min_trials) return false;
    for (const QuantityStats* q_ : {&v_line, &v_phase, &i_line, &p, &q, &f_v, &f_i})
      if (!q_->converged(z, rel, abs_floor)) return false;
    return true;
  }
};

}  // namespace mvtwin
