// One randomized trial with full artifacts, then a ten-trial summary table of
// the same scenario cell.
#include <cstdio>
#include <iostream>

#include "mvtwin/harness.hpp"

using namespace mvtwin;

int main() {
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
  p.vector_group = VectorGroup::Dy11;

  const ScenarioConfig cfg = scenario_by_id("N-c-h1-30k", p);
  TrialArtifacts art;
  const TrialErrors one = run_trial(cfg, 1, 0, &art);
  std::printf("single trial of %s: %zu samples at %.0f Hz, window [%zu, %zu)\n", cfg.id.c_str(),
              art.u_line_twin[0].size(), art.fs, art.window.first, art.window.last);
  std::cout << render_trial_errors(one) << "\n";

  RunOptions opt;
  opt.master_seed = 1;
  opt.trials = 10;
  std::cout << render_stats_table(run_scenario(cfg, opt));
  return 0;
}
