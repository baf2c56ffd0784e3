#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvtwin/errors.hpp"
#include "mvtwin/metrics.hpp"
#include "mvtwin/scenario.hpp"
#include "mvtwin/spectrum.hpp"
#include "mvtwin/transfer.hpp"
#include "mvtwin/twin.hpp"
#include "mvtwin/version.hpp"
#include "mvtwin/waveform.hpp"

namespace mvtwin {

// Trial budgets: the small one answers desk questions in seconds, the large
// one reproduces headline tables and needs a coffee break.
inline constexpr std::size_t kDeskTrials = 500;
inline constexpr std::size_t kFullStudyTrials = 17000;

struct RunOptions {
  std::uint64_t master_seed = 1;
  std::size_t trials = kDeskTrials;  // hard cap in both stopping modes
  bool confidence_stopping = false;  // stop early once every metric settles
  double confidence_z = 2.5758;      // two-sided 99%
  double rel_halfwidth = 0.01;       // target half-width, fraction of the mean
  double abs_halfwidth = 1e-5;       // floor for metrics that sit near zero
  std::size_t min_trials = 50;
};

// Everything needed to reproduce the run travels with the numbers.
struct RunReport {
  std::string scenario_id;
  ScenarioStats stats;
  std::size_t trials = 0;
  bool stopped_on_confidence = false;
  std::uint64_t master_seed = 0;
  double fs = 0.0;
  double dt = 0.0;
  std::string version;
};

// Trials are mutually independent: trial k draws from a stream keyed by the
// master seed, the scenario id and k alone. Partial runs therefore merge in
// trial-index order, and a re-run with the same options reproduces every
// number bit for bit.
inline RunReport run_scenario(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
  cfg.validate();
  if (opt.trials == 0) throw ConfigError("run_scenario: trial cap must be positive");
  RunReport rep;
  rep.scenario_id = cfg.id;
  rep.master_seed = opt.master_seed;
  rep.fs = cfg.fs;
  rep.dt = cfg.dt;
  rep.version = library_version;
  for (std::size_t k = 0; k < opt.trials; ++k) {
    rep.stats.add(run_trial(cfg, opt.master_seed, k));
    if (opt.confidence_stopping &&
        rep.stats.converged(opt.confidence_z, opt.rel_halfwidth, opt.min_trials,
                            opt.abs_halfwidth)) {
      rep.stopped_on_confidence = true;
      break;
    }
  }
  rep.trials = rep.stats.trials;
  return rep;
}

// ---------------------------------------------------------------------------
// Fault observability survey

// Mean headline avg_error per quantity over a healthy reference run. Fault
// cells are judged against multiples of these.
struct NormalBands {
  double v_line = 0.0;
  double v_phase = 0.0;
  double i_line = 0.0;
  double p = 0.0;
  double q = 0.0;
};

inline NormalBands normal_bands(const ScenarioStats& s) {
  return {s.v_line.headline_avg.mean(), s.v_phase.headline_avg.mean(),
          s.i_line.headline_avg.mean(), s.p.headline_avg.mean(), s.q.headline_avg.mean()};
}

// A phase-voltage estimate this far off its reference counts as blind.
inline constexpr double kBlindThreshold = 0.20;

struct FaultCellReport {
  std::string id;
  Observability predicted = Observability::FullyObservable;
  std::size_t trials = 0;
  double worst_phase_avg = 0.0;  // mean over trials of the worst phase error
  double v_line = 0.0;           // mean headline avg_error per quantity
  double v_phase = 0.0;
  double i_line = 0.0;
  double p = 0.0;
  double q = 0.0;
  bool measured_blind = false;
  bool truth_matches = false;  // measurement agrees with the classifier
  bool line_within = false;    // line quantities inside ratio x normal bands
  bool phase_within = false;   // phase voltages inside ratio x normal band
};

inline FaultCellReport evaluate_fault_cell(const ScenarioConfig& cfg, const NormalBands& bands,
                                           std::size_t trials, std::uint64_t master_seed,
                                           double band_ratio = 3.0) {
  if (trials == 0) throw ConfigError("evaluate_fault_cell: needs at least one trial");
  FaultCellReport r;
  r.id = cfg.id;
  r.predicted = classify_fault_observability(cfg.fault_context());
  ScenarioStats st;
  double worst_acc = 0.0;
  for (std::size_t k = 0; k < trials; ++k) {
    const TrialErrors e = run_trial(cfg, master_seed, k);
    st.add(e);
    worst_acc += e.v_phase.worst_phase_avg();
  }
  r.trials = st.trials;
  r.worst_phase_avg = worst_acc / static_cast<double>(trials);
  r.v_line = st.v_line.headline_avg.mean();
  r.v_phase = st.v_phase.headline_avg.mean();
  r.i_line = st.i_line.headline_avg.mean();
  r.p = st.p.headline_avg.mean();
  r.q = st.q.headline_avg.mean();
  r.measured_blind = r.worst_phase_avg > kBlindThreshold;
  r.truth_matches = r.measured_blind == (r.predicted == Observability::PhaseVoltagesUnobservable);
  r.line_within = r.v_line <= band_ratio * bands.v_line && r.i_line <= band_ratio * bands.i_line &&
                  r.p <= band_ratio * bands.p && r.q <= band_ratio * bands.q;
  r.phase_within = r.v_phase <= band_ratio * bands.v_phase;
  return r;
}

inline std::vector<FaultCellReport> fault_survey(const TransformerParams& p,
                                                 const NormalBands& bands,
                                                 std::size_t trials_per_cell,
                                                 std::uint64_t master_seed,
                                                 double band_ratio = 3.0) {
  std::vector<FaultCellReport> out;
  for (const ScenarioConfig& cfg : fault_set(p))
    out.push_back(evaluate_fault_cell(cfg, bands, trials_per_cell, master_seed, band_ratio));
  return out;
}

// ---------------------------------------------------------------------------
// Frequency-response and spectra study

struct HarmonicRow {
  int order = 0;
  double freq = 0.0;
  double v_twin = 0.0;  // line-to-line voltage amplitude, first pair
  double v_ref = 0.0;
  double i_twin = 0.0;  // line current amplitude, first phase
  double i_ref = 0.0;
};

struct FilteringStudy {
  double fs = 0.0;
  double light_fraction = 0.0;
  std::vector<double> freqs;  // shared grid, fundamental up to 10 kHz
  std::vector<TransferPoint> full_rated, lumped_rated;
  std::vector<TransferPoint> full_light, lumped_light;
  std::vector<HarmonicRow> harmonics;  // settled span after the load step
};

// Frequency responses of the detailed and the lumped equivalent at two load
// levels, plus spectra from one scripted step from light to rated load with
// the distortion profile applied and ideal acquisition. Spectra are taken
// over whole fundamental cycles of the record after the step has settled.
inline FilteringStudy filtering_study(const TransformerParams& p, double fs = 30e3,
                                      double light_fraction = 0.1, int max_order = 25) {
  if (max_order < 1) throw ConfigError("filtering_study: need at least the fundamental");
  FilteringStudy out;
  out.fs = fs;
  out.light_fraction = light_fraction;
  const double f0 = p.base_frequency;
  for (int h = 1; static_cast<double>(h) * f0 <= 10e3 + 0.5 * f0; ++h)
    out.freqs.push_back(static_cast<double>(h) * f0);
  const LoadRl rated = load_preset(p, 1.0);
  const LoadRl light = load_preset(p, light_fraction);
  out.full_rated = transfer_function(CircuitModel::full, p, rated, out.freqs, fs);
  out.lumped_rated = transfer_function(CircuitModel::lumped, p, rated, out.freqs, fs);
  out.full_light = transfer_function(CircuitModel::full, p, light, out.freqs, fs);
  out.lumped_light = transfer_function(CircuitModel::lumped, p, light, out.freqs, fs);

  ScenarioConfig cfg;
  cfg.id = "filtering-study";
  cfg.params = p;
  cfg.fs = fs;
  cfg.trajectory = LoadTrajectory::Increase;
  cfg.harmonics = true;
  cfg.ideal_device = true;
  TrialDraw d;
  d.source_phase = 0.0;
  d.emf_scale = {1.0, 1.0, 1.0};
  for (auto& ld : d.load_pre) ld = {light.r, light.l};
  for (auto& ld : d.load_post) ld = {rated.r, rated.l};
  TrialArtifacts art;
  run_trial_with_draw(cfg, d, &art);

  const std::size_t n = art.u_line_twin[0].size();
  const auto e_idx = static_cast<std::size_t>(std::llround((cfg.event_time - art.t0) * fs));
  const auto settle = static_cast<std::size_t>(std::llround(2.0 * fs / f0));
  const auto spc = static_cast<std::size_t>(std::llround(fs / f0));
  const std::size_t first = e_idx + settle;
  if (first + 2 * spc > n) throw ConfigError("filtering_study: record too short for spectra");
  const std::size_t m = ((n - first) / spc) * spc;
  auto spec = [&](const std::vector<double>& x) {
    return amplitude_spectrum(std::span<const double>(x).subspan(first, m), fs);
  };
  const Spectrum vt = spec(art.u_line_twin[0]);
  const Spectrum vr = spec(art.u_line_ref[0]);
  const Spectrum it = spec(art.i_line_twin[0]);
  const Spectrum ir = spec(art.i_line_ref[0]);
  for (int h = 1; h <= max_order; ++h) {
    out.harmonics.push_back({h, static_cast<double>(h) * f0, vt.harmonic(f0, h),
                             vr.harmonic(f0, h), it.harmonic(f0, h), ir.harmonic(f0, h)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Field-record comparison

// Six-channel record on a uniform grid: three phase voltages, three currents.
struct FieldChannels {
  double fs = 0.0;
  double t0 = 0.0;
  std::array<std::vector<double>, 3> u, i;
  std::size_t samples() const { return u[0].size(); }
};

// Phase quantities are compared in the zero-sequence-free frame, the only one
// both a reconstruction and a field recorder can agree on without knowing the
// neutral arrangement behind the measured bus.
struct FieldCompareReport {
  std::size_t samples = 0;
  double fs = 0.0;
  TrialErrors errors;     // normalised by reference RMS over the window
  TrialErrors nameplate;  // same differences against the nameplate scale
  std::string version;
};

inline FieldCompareReport field_compare(const FieldChannels& lv, const FieldChannels& mv,
                                        const TransformerParams& p) {
  p.validate();
  for (const FieldChannels* c : {&lv, &mv})
    for (std::size_t k = 0; k < 3; ++k)
      if (c->u[k].size() != c->samples() || c->i[k].size() != c->samples())
        throw ConfigError("field_compare: channels within one record differ in length");
  if (!(lv.fs > 0.0) || !(mv.fs > 0.0))
    throw ConfigError("field_compare: sample rates must be positive");
  if (std::abs(lv.fs - mv.fs) > 1e-9 * lv.fs)
    throw ConfigError("field_compare: sample rates differ; no resampling is attempted");
  if (lv.samples() != mv.samples())
    throw ConfigError("field_compare: record lengths differ; no realignment is attempted");
  if (std::abs(lv.t0 - mv.t0) > 1e-9)
    throw ConfigError("field_compare: start times differ; no realignment is attempted");

  const double fs = lv.fs;
  const double f0 = p.base_frequency;
  const std::size_t n = lv.samples();
  const auto min_n = static_cast<std::size_t>(std::llround(5.0 * fs / f0)) + 2;
  if (n < min_n) throw ConfigError("field_compare: record shorter than five fundamental cycles");

  using detail::nxt;
  const bool delta = mv_is_delta(p.vector_group);
  ThreePhaseTwin twin(p, fs);
  std::array<std::vector<double>, 3> ul_t, il_t, ph_t, ul_r, il_r, ph_r;
  for (auto* a : {&ul_t, &il_t, &ph_t, &ul_r, &il_r, &ph_r})
    for (auto& v : *a) v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto o = twin.step({lv.u[0][i], lv.u[1][i], lv.u[2][i]},
                             {lv.i[0][i], lv.i[1][i], lv.i[2][i]});
    const double mu = (mv.u[0][i] + mv.u[1][i] + mv.u[2][i]) / 3.0;
    const double me = (o.u_phase_est[0] + o.u_phase_est[1] + o.u_phase_est[2]) / 3.0;
    for (std::size_t k = 0; k < 3; ++k) {
      ul_t[k][i] = o.frame.u_line[k];
      il_t[k][i] = o.frame.i_line[k];
      ph_t[k][i] = o.u_phase_est[k] - me;
      // the composed line-to-line convention in terms of terminal voltages
      ul_r[k][i] = delta ? std::numbers::sqrt3 * (mv.u[k][i] - mu)
                         : mv.u[k][i] - mv.u[nxt(k)][i];
      il_r[k][i] = mv.i[k][i];
      ph_r[k][i] = mv.u[k][i] - mu;
    }
  }

  const SampleRange wnd{2, n};
  const double v_ll_nom = p.v2_rated;
  const double v_ph_nom = p.v2_rated / std::numbers::sqrt3;
  const double i_nom = p.s_rated / (std::numbers::sqrt3 * p.v2_rated);
  const double s_ph_nom = p.s_rated / 3.0;

  // Same scoring as a simulated trial, with a second copy of each quantity
  // rescaled from reference RMS to the nameplate scale.
  auto score2 = [&](const std::array<std::vector<double>, 3>& dut,
                    const std::array<std::vector<double>, 3>& ref, double nameplate,
                    QuantityErrors& rel, QuantityErrors& np) {
    double sum_avg = 0.0, sum_max = 0.0, np_avg = 0.0, np_max = 0.0;
    int used = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double ref_rms = rms(ref[k], wnd);
      rel.phase_low_signal[k] = np.phase_low_signal[k] = low_signal(ref_rms, nameplate);
      if (ref_rms > 0.0) {
        rel.phase[k] = signal_errors(dut[k], ref[k], wnd);
        const double rescale = ref_rms / nameplate;
        np.phase[k] = {rel.phase[k].avg * rescale, rel.phase[k].max_point * rescale};
      }
      if (rel.phase_low_signal[k]) continue;
      rel.phase_used[k] = np.phase_used[k] = true;
      sum_avg += rel.phase[k].avg;
      sum_max += rel.phase[k].max_point;
      np_avg += np.phase[k].avg;
      np_max += np.phase[k].max_point;
      ++used;
    }
    if (used > 0) {
      rel.headline = {sum_avg / used, sum_max / used};
      np.headline = {np_avg / used, np_max / used};
    } else {
      rel.headline_low_signal = np.headline_low_signal = true;
      for (std::size_t k = 0; k < 3; ++k) {
        rel.headline.avg += rel.phase[k].avg / 3.0;
        rel.headline.max_point += rel.phase[k].max_point / 3.0;
        np.headline.avg += np.phase[k].avg / 3.0;
        np.headline.max_point += np.phase[k].max_point / 3.0;
      }
    }
  };

  FieldCompareReport rep;
  rep.samples = n;
  rep.fs = fs;
  rep.version = library_version;
  score2(ul_t, ul_r, v_ll_nom, rep.errors.v_line, rep.nameplate.v_line);
  score2(ph_t, ph_r, v_ph_nom, rep.errors.v_phase, rep.nameplate.v_phase);
  score2(il_t, il_r, i_nom, rep.errors.i_line, rep.nameplate.i_line);

  std::array<std::vector<double>, 3> p_t, p_r, q_t, q_r;
  for (std::size_t k = 0; k < 3; ++k) {
    p_t[k] = sliding_active_power(ph_t[k], il_t[k], fs, f0);
    p_r[k] = sliding_active_power(ph_r[k], il_r[k], fs, f0);
    q_t[k] = sliding_reactive_power(ph_t[k], il_t[k], fs, f0);
    q_r[k] = sliding_reactive_power(ph_r[k], il_r[k], fs, f0);
  }
  score2(p_t, p_r, s_ph_nom, rep.errors.p, rep.nameplate.p);
  score2(q_t, q_r, s_ph_nom, rep.errors.q, rep.nameplate.q);

  rep.errors.f_v = frequency_quality(ul_t[0], ul_r[0], fs, wnd, f0);
  rep.errors.f_i = frequency_quality(il_t[0], il_r[0], fs, wnd, f0);
  rep.nameplate.f_v = rep.errors.f_v;
  rep.nameplate.f_i = rep.errors.f_i;
  return rep;
}

// ---------------------------------------------------------------------------
// Text rendering

namespace detail {

// Errors beyond 100% carry no more information than "off the chart".
inline std::string pct(double x) {
  if (std::isnan(x)) return "--";
  if (!std::isfinite(x) || x > 1.0) return ">100";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", 100.0 * x);
  return buf;
}

inline std::string rpad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

inline std::string lpad(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

}  // namespace detail

inline std::vector<std::pair<std::string, const QuantityStats*>> quantity_rows(
    const ScenarioStats& s) {
  return {{"V line-line", &s.v_line}, {"V phase", &s.v_phase}, {"I line", &s.i_line},
          {"P", &s.p},                {"Q", &s.q},             {"f from V", &s.f_v},
          {"f from I", &s.f_i}};
}

inline std::string render_stats_table(const RunReport& rep) {
  using detail::lpad;
  using detail::pct;
  using detail::rpad;
  std::string out;
  char head[160];
  std::snprintf(head, sizeof(head), "scenario %s  trials %zu  seed %llu  fs %g Hz  dt %g s  v%s\n",
                rep.scenario_id.c_str(), rep.trials,
                static_cast<unsigned long long>(rep.master_seed), rep.fs, rep.dt,
                rep.version.c_str());
  out += head;
  out += rpad("quantity", 13) + lpad("avg%/mean", 10) + lpad("avg%/max", 10) +
         lpad("avg%/min", 10) + lpad("maxpt%/mean", 12) + lpad("flagged", 9) + "\n";
  for (const auto& [name, qs] : quantity_rows(rep.stats)) {
    out += rpad(name, 13) + lpad(pct(qs->headline_avg.mean()), 10) +
           lpad(pct(qs->headline_avg.max()), 10) + lpad(pct(qs->headline_avg.min()), 10) +
           lpad(qs->has_max_point ? pct(qs->headline_max.mean()) : "--", 12) +
           lpad(std::to_string(qs->headline_avg.n_all - qs->headline_avg.n), 9) + "\n";
  }
  return out;
}

// One trial or one field comparison: per-phase and headline errors. Cells of
// phases carrying under 5% of nameplate are marked with a trailing '*'.
inline std::string render_trial_errors(const TrialErrors& t) {
  using detail::lpad;
  using detail::pct;
  using detail::rpad;
  std::string out;
  out += rpad("quantity", 13) + lpad("phA%", 10) + lpad("phB%", 10) + lpad("phC%", 10) +
         lpad("avg%", 10) + lpad("maxpt%", 10) + "\n";
  const std::array<std::pair<const char*, const QuantityErrors*>, 7> rows = {{
      {"V line-line", &t.v_line},
      {"V phase", &t.v_phase},
      {"I line", &t.i_line},
      {"P", &t.p},
      {"Q", &t.q},
      {"f from V", &t.f_v},
      {"f from I", &t.f_i},
  }};
  for (const auto& [name, q] : rows) {
    out += rpad(name, 13);
    for (std::size_t k = 0; k < 3; ++k) {
      if (!q->has_max_point) {
        out += lpad("--", 10);
        continue;
      }
      std::string cell = pct(q->phase[k].avg);
      if (q->phase_low_signal[k]) cell += "*";
      out += lpad(cell, 10);
    }
    std::string head = pct(q->headline.avg);
    if (q->headline_low_signal) head += "*";
    out += lpad(head, 10) +
           lpad(q->has_max_point ? pct(q->headline.max_point) : "--", 10) + "\n";
  }
  return out;
}

inline std::string render_fault_table(const std::vector<FaultCellReport>& cells) {
  using detail::lpad;
  using detail::pct;
  using detail::rpad;
  std::string out;
  out += rpad("cell", 22) + rpad("predicted", 11) + lpad("worst ph%", 10) + lpad("Vll%", 9) +
         lpad("I%", 9) + lpad("P%", 9) + lpad("Q%", 9) + lpad("match", 7) + lpad("lines", 7) +
         "\n";
  for (const FaultCellReport& c : cells) {
    const bool blind = c.predicted == Observability::PhaseVoltagesUnobservable;
    out += rpad(c.id, 22) + rpad(blind ? "blind" : "observable", 11) +
           lpad(pct(c.worst_phase_avg), 10) + lpad(pct(c.v_line), 9) + lpad(pct(c.i_line), 9) +
           lpad(pct(c.p), 9) + lpad(pct(c.q), 9) + lpad(c.truth_matches ? "yes" : "NO", 7) +
           lpad(c.line_within ? "yes" : "NO", 7) + "\n";
  }
  return out;
}

}  // namespace mvtwin
