#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mvtwin/harness.hpp"

using namespace mvtwin;

namespace {

TransformerParams bench_params(VectorGroup g = VectorGroup::Dy11) {
  TransformerParams p;
  p.s_rated = 50e3;
  p.v1_rated = 400.0;
  p.v2_rated = 20e3;
  p.r1 = 0.0075;
  p.l1 = 0.02;
  p.r2 = 0.0075;
  p.l2 = 0.02;
  p.rm = 500.0;
  p.lm = 500.0;
  p.vector_group = g;
  return p;
}

// Synthetic trial with every quantity sitting at one error level.
TrialErrors flat_trial(double level, bool flagged = false) {
  QuantityErrors q;
  for (std::size_t k = 0; k < 3; ++k) {
    q.phase[k] = {level, level};
    q.phase_used[k] = !flagged;
    q.phase_low_signal[k] = flagged;
  }
  q.headline = {level, level};
  q.headline_low_signal = flagged;
  TrialErrors t;
  t.v_line = t.v_phase = t.i_line = t.p = t.q = q;
  q.has_max_point = false;
  t.f_v = t.f_i = q;
  return t;
}

void require_same_stat(const Stat& a, const Stat& b) {
  REQUIRE(a.n == b.n);
  REQUIRE(a.n_all == b.n_all);
  REQUIRE(a.mean_ == b.mean_);
  REQUIRE(a.mx == b.mx);
  REQUIRE(a.mn == b.mn);
}

void require_same_stats(const ScenarioStats& a, const ScenarioStats& b) {
  REQUIRE(a.trials == b.trials);
  const QuantityStats* qa[] = {&a.v_line, &a.v_phase, &a.i_line, &a.p, &a.q, &a.f_v, &a.f_i};
  const QuantityStats* qb[] = {&b.v_line, &b.v_phase, &b.i_line, &b.p, &b.q, &b.f_v, &b.f_i};
  for (int j = 0; j < 7; ++j) {
    require_same_stat(qa[j]->headline_avg, qb[j]->headline_avg);
    require_same_stat(qa[j]->headline_max, qb[j]->headline_max);
    for (std::size_t k = 0; k < 3; ++k) require_same_stat(qa[j]->phase_avg[k], qb[j]->phase_avg[k]);
  }
}

}  // namespace

TEST_CASE("a single-trial run reports exactly that trial") {
  const auto cfg = scenario_by_id("N-c-h0-30k", bench_params());
  RunOptions opt;
  opt.master_seed = 2024;
  opt.trials = 1;
  const RunReport rep = run_scenario(cfg, opt);
  const TrialErrors one = run_trial(cfg, 2024, 0);
  REQUIRE(rep.trials == 1);
  REQUIRE(rep.scenario_id == cfg.id);
  REQUIRE(rep.master_seed == 2024);
  REQUIRE(rep.fs == cfg.fs);
  REQUIRE(rep.dt == cfg.dt);
  REQUIRE(rep.version == std::string(library_version));
  REQUIRE_FALSE(rep.stopped_on_confidence);
  REQUIRE(rep.stats.v_line.headline_avg.mean() == one.v_line.headline.avg);
  REQUIRE(rep.stats.i_line.headline_avg.mean() == one.i_line.headline.avg);
  REQUIRE(rep.stats.p.headline_avg.mean() == one.p.headline.avg);
  REQUIRE(rep.stats.f_v.headline_avg.mean() == one.f_v.headline.avg);
}

TEST_CASE("rerunning with one seed reproduces the table bit for bit") {
  const auto cfg = scenario_by_id("N-i-h1-30k", bench_params());
  RunOptions opt;
  opt.master_seed = 77;
  opt.trials = 4;
  const RunReport a = run_scenario(cfg, opt);
  const RunReport b = run_scenario(cfg, opt);
  REQUIRE(a.trials == 4);
  require_same_stats(a.stats, b.stats);
  REQUIRE(render_stats_table(a) == render_stats_table(b));
}

TEST_CASE("confidence stopping halts at the configured trial floor") {
  // Zero spread: the width test passes as soon as the floor allows.
  ScenarioStats st;
  for (int k = 0; k < 2; ++k) st.add(flat_trial(0.05));
  REQUIRE(st.converged(2.5758, 0.01, 2));
  REQUIRE_FALSE(st.converged(2.5758, 0.01, 5));
  for (int k = 0; k < 3; ++k) st.add(flat_trial(0.05));
  REQUIRE(st.converged(2.5758, 0.01, 5));

  // Against live trials: a loose width target makes the floor the binding
  // constraint, well under the cap.
  const auto cfg = scenario_by_id("N-c-h0-30k", bench_params());
  RunOptions opt;
  opt.master_seed = 5;
  opt.trials = 50;
  opt.confidence_stopping = true;
  opt.rel_halfwidth = 10.0;
  opt.min_trials = 5;
  const RunReport rep = run_scenario(cfg, opt);
  REQUIRE(rep.trials == 5);
  REQUIRE(rep.stopped_on_confidence);
}

TEST_CASE("the aggregate orders mean, max and min as documented") {
  ScenarioStats st;
  st.add(flat_trial(0.01));
  st.add(flat_trial(0.02));
  st.add(flat_trial(0.03));
  REQUIRE(st.trials == 3);
  REQUIRE(st.v_line.headline_avg.mean() == Catch::Approx(0.02).margin(1e-15));
  REQUIRE(st.v_line.headline_avg.max() == 0.03);
  REQUIRE(st.v_line.headline_avg.min() == 0.01);
  REQUIRE(st.q.headline_avg.mean() == Catch::Approx(0.02).margin(1e-15));
}

TEST_CASE("low-signal trials stay out of the means but in the extremes") {
  ScenarioStats st;
  st.add(flat_trial(0.01));
  st.add(flat_trial(0.50, true));
  REQUIRE(st.v_line.headline_avg.n == 1);
  REQUIRE(st.v_line.headline_avg.n_all == 2);
  REQUIRE(st.v_line.headline_avg.mean() == 0.01);
  REQUIRE(st.v_line.headline_avg.max() == 0.50);
  REQUIRE(st.v_line.headline_avg.min() == 0.01);
}

TEST_CASE("normal bands gate the fault cells against the healthy baseline") {
  const auto p = bench_params();
  RunOptions base;
  base.master_seed = 7;
  base.trials = 6;
  const RunReport healthy = run_scenario(scenario_by_id("N-c-h1-30k", p), base);
  const NormalBands bands = normal_bands(healthy.stats);
  REQUIRE(bands.v_line > 0.0);
  REQUIRE(bands.i_line > bands.v_line);

  const auto tracking = evaluate_fault_cell(scenario_by_id("F-ll-mv-ung-dyg", p), bands, 2, 7);
  REQUIRE(tracking.predicted == Observability::FullyObservable);
  REQUIRE_FALSE(tracking.measured_blind);
  REQUIRE(tracking.truth_matches);
  REQUIRE(tracking.line_within);
  REQUIRE(tracking.trials == 2);

  const auto blind = evaluate_fault_cell(scenario_by_id("F-lg-mv-coil-yygu", p), bands, 2, 7);
  REQUIRE(blind.predicted == Observability::PhaseVoltagesUnobservable);
  REQUIRE(blind.measured_blind);
  REQUIRE(blind.truth_matches);
  REQUIRE(blind.line_within);
}

TEST_CASE("the filtering study pairs both models at both load levels") {
  const auto p = bench_params();
  const FilteringStudy st = filtering_study(p, 30e3);
  REQUIRE(st.freqs.size() == 200);
  REQUIRE(st.freqs.front() == 50.0);
  REQUIRE(st.freqs.back() == 10e3);
  REQUIRE(st.full_rated.size() == st.freqs.size());
  REQUIRE(st.lumped_rated.size() == st.freqs.size());

  // Both equivalents agree at the fundamental and split at high frequency,
  // where only the detailed model keeps the magnetizing path in the loop.
  const double gap50 = std::abs(st.full_rated[0].v_gain_db - st.lumped_rated[0].v_gain_db);
  REQUIRE(gap50 < 0.5);
  const double gap1k = std::abs(st.full_rated[19].v_gain_db - st.lumped_rated[19].v_gain_db);
  const double gap10k = std::abs(st.full_rated[199].v_gain_db - st.lumped_rated[199].v_gain_db);
  REQUIRE(gap10k > gap1k);
  REQUIRE(st.full_light[0].v_gain != st.full_rated[0].v_gain);

  REQUIRE(st.harmonics.size() == 25);
  const HarmonicRow& fund = st.harmonics.front();
  REQUIRE(fund.order == 1);
  REQUIRE(fund.v_ref ==
          Catch::Approx(std::numbers::sqrt2 * p.v2_rated).epsilon(0.2));
  for (const HarmonicRow& row : st.harmonics) {
    if (row.order > 20 || row.v_ref < 1e-3 * fund.v_ref) continue;
    REQUIRE(row.v_twin == Catch::Approx(row.v_ref).epsilon(0.05));
  }
}

TEST_CASE("a record matching the twin output compares to zero") {
  const auto p = bench_params(VectorGroup::Yy0);
  const double fs = 13.2e3;
  const double f0 = p.base_frequency;
  const std::size_t n = static_cast<std::size_t>(std::llround(0.2 * fs));
  const double a_lv = std::numbers::sqrt2 * p.v1_rated / std::numbers::sqrt3;
  const double a_i = 40.0;

  FieldChannels lv;
  lv.fs = fs;
  for (std::size_t k = 0; k < 3; ++k) {
    lv.u[k].resize(n);
    lv.i[k].resize(n);
    const double psi = -2.0 * std::numbers::pi * static_cast<double>(k) / 3.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double wt = 2.0 * std::numbers::pi * f0 * static_cast<double>(i) / fs + psi;
      lv.u[k][i] = a_lv * std::sin(wt);
      lv.i[k][i] = a_i * std::sin(wt - 0.6);
    }
  }

  // The opposite-side record is the twin's own reconstruction played back as
  // phase voltages and line currents.
  FieldChannels mv;
  mv.fs = fs;
  ThreePhaseTwin twin(p, fs);
  for (std::size_t k = 0; k < 3; ++k) {
    mv.u[k].resize(n);
    mv.i[k].resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto o = twin.step({lv.u[0][i], lv.u[1][i], lv.u[2][i]},
                             {lv.i[0][i], lv.i[1][i], lv.i[2][i]});
    for (std::size_t k = 0; k < 3; ++k) {
      mv.u[k][i] = o.u_phase_est[k];
      mv.i[k][i] = o.frame.i_line[k];
    }
  }

  const FieldCompareReport rep = field_compare(lv, mv, p);
  REQUIRE(rep.samples == n);
  REQUIRE(rep.fs == fs);
  REQUIRE(rep.errors.v_line.headline.avg < 1e-12);
  REQUIRE(rep.errors.v_phase.headline.avg < 1e-12);
  REQUIRE(rep.errors.i_line.headline.avg < 1e-12);
  REQUIRE(rep.errors.p.headline.avg < 1e-12);
  REQUIRE(rep.errors.q.headline.avg < 1e-12);
  REQUIRE(rep.errors.f_v.headline.avg < 1e-12);
  REQUIRE(rep.nameplate.v_line.headline.avg < 1e-12);
}

TEST_CASE("misaligned field records are rejected outright") {
  const auto p = bench_params(VectorGroup::Yy0);
  const double fs = 10e3;
  const std::size_t n = 2000;
  FieldChannels a;
  a.fs = fs;
  for (std::size_t k = 0; k < 3; ++k) {
    a.u[k].assign(n, 0.0);
    a.i[k].assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double wt = 2.0 * std::numbers::pi * 50.0 * static_cast<double>(i) / fs;
      a.u[k][i] = 300.0 * std::sin(wt);
      a.i[k][i] = 10.0 * std::sin(wt);
    }
  }
  FieldChannels b = a;

  SECTION("rate mismatch") {
    b.fs = 13.2e3;
    REQUIRE_THROWS_AS(field_compare(a, b, p), ConfigError);
  }
  SECTION("length mismatch") {
    for (std::size_t k = 0; k < 3; ++k) {
      b.u[k].pop_back();
      b.i[k].pop_back();
    }
    REQUIRE_THROWS_AS(field_compare(a, b, p), ConfigError);
  }
  SECTION("ragged channels within one record") {
    b.i[2].pop_back();
    REQUIRE_THROWS_AS(field_compare(a, b, p), ConfigError);
  }
  SECTION("start-time mismatch") {
    b.t0 = 0.25;
    REQUIRE_THROWS_AS(field_compare(a, b, p), ConfigError);
  }
  SECTION("record too short to score") {
    FieldChannels c = a, d = a;
    for (std::size_t k = 0; k < 3; ++k) {
      c.u[k].resize(50);
      c.i[k].resize(50);
      d.u[k].resize(50);
      d.i[k].resize(50);
    }
    REQUIRE_THROWS_AS(field_compare(c, d, p), ConfigError);
  }
}

TEST_CASE("tables render flagged and off-scale cells readably") {
  const auto cfg = scenario_by_id("N-c-h0-30k", bench_params());
  RunOptions opt;
  opt.master_seed = 11;
  opt.trials = 2;
  const RunReport rep = run_scenario(cfg, opt);
  const std::string table = render_stats_table(rep);
  REQUIRE(table.find("scenario N-c-h0-30k") != std::string::npos);
  REQUIRE(table.find("V line-line") != std::string::npos);
  REQUIRE(table.find("f from I") != std::string::npos);
  REQUIRE(table.find("nan") == std::string::npos);

  FaultCellReport cell;
  cell.id = "F-lg-mv-coil-dyg";
  cell.predicted = Observability::PhaseVoltagesUnobservable;
  cell.worst_phase_avg = 5.0;
  cell.v_line = 0.01;
  cell.truth_matches = true;
  cell.line_within = true;
  const std::string fault = render_fault_table({cell});
  REQUIRE(fault.find(">100") != std::string::npos);
  REQUIRE(fault.find("blind") != std::string::npos);
  REQUIRE(fault.find("F-lg-mv-coil-dyg") != std::string::npos);
}
