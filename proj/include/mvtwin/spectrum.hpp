#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace mvtwin {

// One-sided amplitude spectrum: a unit-amplitude sinusoid landing on a bin
// reads 1.0 at that bin. Bin k sits at k * bin_hz.
struct Spectrum {
  double bin_hz = 0.0;
  std::vector<double> amplitude;

  double amplitude_at(double f) const {
    const auto k = static_cast<std::size_t>(std::llround(f / bin_hz));
    if (k >= amplitude.size()) throw std::out_of_range("spectrum: frequency beyond Nyquist");
    return amplitude[k];
  }
  double harmonic(double f0, int h) const { return amplitude_at(f0 * h); }
  // True when f0 is an integer number of bins, i.e. the record spans whole cycles.
  bool coherent(double f0) const {
    const double bins = f0 / bin_hz;
    return std::abs(bins - std::round(bins)) < 1e-6;
  }
};

// FFTW planning is not thread safe; execution of a ready plan is.
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

inline Spectrum amplitude_spectrum(std::span<const double> x, double fs) {
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("amplitude_spectrum: need at least 2 samples");
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(n / 2 + 1);
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                          reinterpret_cast<fftw_complex*>(out.data()),
                                          FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
  }
  Spectrum s;
  s.bin_hz = fs / static_cast<double>(n);
  s.amplitude.resize(out.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const bool edge = (k == 0) || (n % 2 == 0 && k == n / 2);
    s.amplitude[k] = (edge ? 1.0 : 2.0) * std::abs(out[k]) * inv_n;
  }
  return s;
}

}  // namespace mvtwin
