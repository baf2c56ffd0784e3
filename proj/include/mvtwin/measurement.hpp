#pragma once

#include <cmath>
#include <cstddef>

#include "mvtwin/errors.hpp"
#include "mvtwin/rng.hpp"
#include "mvtwin/waveform.hpp"

namespace mvtwin {

// Per-sample instrument error: resample the internal-rate record at the
// device rate, then scale every sample by an independent factor drawn
// uniformly from [1-accuracy, 1+accuracy].
inline Waveform measure(const Waveform& internal, double fs, double accuracy, Rng& rng) {
  if (!(fs > 0.0) || fs > internal.fs / 2.0)
    throw ConfigError("device rate must satisfy 0 < fs <= internal rate / 2");
  if (!(accuracy >= 0.0)) throw ConfigError("accuracy must be >= 0");
  const auto span = (internal.t_end() - internal.t0) * fs;
  const auto n = static_cast<std::size_t>(std::floor(span)) + 1;
  Waveform out = resample_linear(internal, fs, internal.t0, n);
  if (accuracy > 0.0)
    for (double& x : out.samples) x *= 1.0 + rng.uniform(-accuracy, accuracy);
  return out;
}

// One channel of a deployed device: a constant gain error plus a constant
// time offset (instrument phase error and the shared ADC clock offset).
// Folding both into the resampling pass keeps the reference grid and the
// distorted grid generated by the same interpolator.
struct ChannelModel {
  double gain = 1.0;
  double delay = 0.0;  // seconds
};

inline Waveform sample_channel(const Waveform& internal, double fs, double t_start,
                               std::size_t n, const ChannelModel& ch = {}) {
  if (!(fs > 0.0) || fs > internal.fs / 2.0)
    throw ConfigError("device rate must satisfy 0 < fs <= internal rate / 2");
  Waveform out;
  out.fs = fs;
  out.t0 = t_start;
  out.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    out.samples[k] =
        ch.gain * sample_linear(internal, t_start + static_cast<double>(k) / fs + ch.delay);
  return out;
}

// Per-trial channel imperfections for a three-voltage, three-current device.
// Gains are uniform in the accuracy band; phase errors are uniform within the
// class limit and enter as time delays at the fundamental; one clock offset
// is shared by all six channels.
struct DeviceDraw {
  ChannelModel v[3];
  ChannelModel i[3];
  double clock_offset = 0.0;
};

struct DeviceModel {
  double accuracy_v = 1e-3;     // relative, half width
  double accuracy_i = 1e-2;
  double phase_limit_v = 5e-3;  // radians at f0, half width
  double phase_limit_i = 80e-3;
  double f0 = 50.0;
};

inline DeviceDraw draw_device(const DeviceModel& m, double fs, Rng& rng) {
  if (!(fs > 0.0)) throw ConfigError("device rate must be positive");
  DeviceDraw d;
  const double w0 = 2.0 * 3.14159265358979323846 * m.f0;
  d.clock_offset = rng.uniform(0.0, 1.0 / fs);
  for (int k = 0; k < 3; ++k) {
    d.v[k].gain = 1.0 + rng.uniform(-m.accuracy_v, m.accuracy_v);
    d.v[k].delay = d.clock_offset + rng.uniform(-m.phase_limit_v, m.phase_limit_v) / w0;
    d.i[k].gain = 1.0 + rng.uniform(-m.accuracy_i, m.accuracy_i);
    d.i[k].delay = d.clock_offset + rng.uniform(-m.phase_limit_i, m.phase_limit_i) / w0;
  }
  return d;
}

}  // namespace mvtwin
