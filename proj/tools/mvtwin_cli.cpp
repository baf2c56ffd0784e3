#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvtwin/config_io.hpp"
#include "mvtwin/csv_io.hpp"
#include "mvtwin/harness.hpp"

using namespace mvtwin;

namespace {

// The simulation study unit; --params swaps in any other transformer.
TransformerParams default_params() {
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
  return p;
}

TransformerParams load_params(const std::string& path) {
  return path.empty() ? default_params() : read_params_file(path);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

void persist_report(const std::string& out_dir, const RunReport& rep) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  write_text(dir / (rep.scenario_id + "-report.csv"), report_csv(rep));
  write_text(dir / (rep.scenario_id + "-provenance.txt"), provenance_text(rep));
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CliOptions {
  std::string params_path, id, out_dir, lv_path, mv_path, out_path;
  std::uint64_t seed = 1;
  std::size_t trials = kDeskTrials;
  std::size_t matrix_trials = 40;
  std::size_t fault_trials = 3;
  std::size_t baseline_trials = 40;
  bool confidence = false;
  bool study_scale = false;
  double band_ratio = 3.0;
  double fs_check = 0.0;
  double study_fs = 30e3;
  double light_fraction = 0.1;
};

int do_list(const CliOptions& o) {
  for (const ScenarioConfig& cfg : full_catalog(load_params(o.params_path)))
    std::cout << cfg.id << "\n";
  return 0;
}

int do_run_scenario(const CliOptions& o) {
  const auto p = load_params(o.params_path);
  const ScenarioConfig cfg = scenario_by_id(o.id, p);
  RunOptions opt;
  opt.master_seed = o.seed;
  opt.trials = o.study_scale ? kFullStudyTrials : o.trials;
  opt.confidence_stopping = o.confidence || o.study_scale;
  const RunReport rep = run_scenario(cfg, opt);
  std::cout << render_stats_table(rep);
  if (rep.stopped_on_confidence)
    std::cout << "stopped on confidence after " << rep.trials << " trials\n";
  if (!o.out_dir.empty()) persist_report(o.out_dir, rep);
  return 0;
}

int do_run_matrix(const CliOptions& o) {
  const auto p = load_params(o.params_path);
  for (const ScenarioConfig& cfg : normal_matrix(p)) {
    RunOptions opt;
    opt.master_seed = o.seed;
    opt.trials = o.matrix_trials;
    const RunReport rep = run_scenario(cfg, opt);
    std::cout << render_stats_table(rep) << "\n";
    if (!o.out_dir.empty()) persist_report(o.out_dir, rep);
  }
  return 0;
}

int do_run_faults(const CliOptions& o) {
  const auto p = load_params(o.params_path);
  RunOptions bopt;
  bopt.master_seed = o.seed;
  bopt.trials = o.baseline_trials;
  const RunReport healthy = run_scenario(scenario_by_id("N-c-h1-30k", p), bopt);
  const NormalBands bands = normal_bands(healthy.stats);
  std::cout << "healthy baseline\n" << render_stats_table(healthy) << "\n";
  const auto cells = fault_survey(p, bands, o.fault_trials, o.seed, o.band_ratio);
  std::cout << render_fault_table(cells);
  std::size_t matched = 0, within = 0;
  for (const auto& c : cells) {
    matched += c.truth_matches;
    within += c.line_within;
  }
  std::cout << matched << "/" << cells.size() << " match the observability prediction, "
            << within << "/" << cells.size() << " keep line quantities within "
            << o.band_ratio << "x the healthy bands\n";
  if (!o.out_dir.empty()) {
    persist_report(o.out_dir, healthy);
    std::string csv;
    csv += "# seed=" + std::to_string(o.seed) + "\n";
    csv += "# trials_per_cell=" + std::to_string(o.fault_trials) + "\n";
    csv += "# band_ratio=" + g17(o.band_ratio) + "\n";
    csv += "# version=" + std::string(library_version) + "\n";
    csv += "cell,predicted,worst_phase_avg,v_line,v_phase,i_line,p,q,matches,lines_within\n";
    for (const auto& c : cells) {
      const bool blind = c.predicted == Observability::PhaseVoltagesUnobservable;
      csv += c.id + "," + (blind ? "blind" : "observable") + "," + g17(c.worst_phase_avg) + "," +
             g17(c.v_line) + "," + g17(c.v_phase) + "," + g17(c.i_line) + "," + g17(c.p) + "," +
             g17(c.q) + "," + (c.truth_matches ? "1" : "0") + "," + (c.line_within ? "1" : "0") +
             "\n";
    }
    std::filesystem::create_directories(o.out_dir);
    write_text(std::filesystem::path(o.out_dir) / "faults-report.csv", csv);
  }
  return 0;
}

int do_filtering_study(const CliOptions& o) {
  const auto p = load_params(o.params_path);
  const FilteringStudy st = filtering_study(p, o.study_fs, o.light_fraction);
  std::cout << "voltage gain, dB (detailed model vs per-sample equivalent)\n";
  std::cout << "   f_Hz  full/rated  lump/rated  full/light  lump/light\n";
  char buf[160];
  for (std::size_t k = 0; k < st.freqs.size(); ++k) {
    const auto h = static_cast<int>(k) + 1;
    const bool shown = h <= 25 || h % 20 == 0;
    if (!shown) continue;
    std::snprintf(buf, sizeof(buf), "%7.0f  %10.3f  %10.3f  %10.3f  %10.3f\n", st.freqs[k],
                  st.full_rated[k].v_gain_db, st.lumped_rated[k].v_gain_db,
                  st.full_light[k].v_gain_db, st.lumped_light[k].v_gain_db);
    std::cout << buf;
  }
  std::cout << "\nspectra after the load step (amplitudes, first line pair / phase)\n";
  std::cout << "  h    f_Hz      V twin       V ref      I twin       I ref\n";
  for (const HarmonicRow& r : st.harmonics) {
    std::snprintf(buf, sizeof(buf), "%3d %7.0f %11.4g %11.4g %11.4g %11.4g\n", r.order, r.freq,
                  r.v_twin, r.v_ref, r.i_twin, r.i_ref);
    std::cout << buf;
  }
  if (!o.out_dir.empty()) {
    std::filesystem::create_directories(o.out_dir);
    std::string bode;
    bode += "# fs=" + g17(st.fs) + "\n";
    bode += "# light_fraction=" + g17(st.light_fraction) + "\n";
    bode += "# version=" + std::string(library_version) + "\n";
    bode +=
        "freq,full_rated_v_db,lumped_rated_v_db,full_light_v_db,lumped_light_v_db,"
        "full_rated_i_db,lumped_rated_i_db,full_light_i_db,lumped_light_i_db\n";
    for (std::size_t k = 0; k < st.freqs.size(); ++k) {
      bode += g17(st.freqs[k]) + "," + g17(st.full_rated[k].v_gain_db) + "," +
              g17(st.lumped_rated[k].v_gain_db) + "," + g17(st.full_light[k].v_gain_db) + "," +
              g17(st.lumped_light[k].v_gain_db) + "," + g17(st.full_rated[k].i_gain_db) + "," +
              g17(st.lumped_rated[k].i_gain_db) + "," + g17(st.full_light[k].i_gain_db) + "," +
              g17(st.lumped_light[k].i_gain_db) + "\n";
    }
    write_text(std::filesystem::path(o.out_dir) / "frequency-response.csv", bode);
    std::string harm;
    harm += "# fs=" + g17(st.fs) + "\n";
    harm += "# version=" + std::string(library_version) + "\n";
    harm += "order,freq,v_twin,v_ref,i_twin,i_ref\n";
    for (const HarmonicRow& r : st.harmonics)
      harm += std::to_string(r.order) + "," + g17(r.freq) + "," + g17(r.v_twin) + "," +
              g17(r.v_ref) + "," + g17(r.i_twin) + "," + g17(r.i_ref) + "\n";
    write_text(std::filesystem::path(o.out_dir) / "harmonics.csv", harm);
  }
  return 0;
}

int do_twin_file(const CliOptions& o) {
  const auto p = load_params(o.params_path);
  const CsvRecord in_rec = read_waveform_csv_file(o.lv_path);
  if (o.fs_check > 0.0 && std::abs(in_rec.fs - o.fs_check) > 1e-9 * in_rec.fs)
    throw ConfigError("file carries fs=" + g17(in_rec.fs) + ", --fs asked for " +
                      g17(o.fs_check));
  const FieldChannels lv = to_field_channels(in_rec);
  const std::size_t n = in_rec.rows();

  ThreePhaseTwin twin(p, in_rec.fs);
  CsvRecord out_rec;
  out_rec.fs = in_rec.fs;
  out_rec.t0 = in_rec.t0;
  out_rec.columns = {"uA", "uB", "uC", "iA", "iB", "iC"};
  out_rec.data.assign(6, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto out = twin.step({lv.u[0][i], lv.u[1][i], lv.u[2][i]},
                               {lv.i[0][i], lv.i[1][i], lv.i[2][i]});
    for (std::size_t k = 0; k < 3; ++k) {
      out_rec.data[k][i] = out.u_phase_est[k];
      out_rec.data[3 + k][i] = out.frame.i_line[k];
    }
  }
  out_rec.comments = {"operation=twin-file", "source=" + o.lv_path,
                      "params=" + (o.params_path.empty() ? "builtin" : o.params_path),
                      "version=" + std::string(library_version)};
  write_waveform_csv_file(o.out_path, out_rec);
  std::cout << "wrote " << o.out_path << " (" << n << " samples at " << g17(in_rec.fs)
            << " Hz)\n";
  return 0;
}

int do_field_compare(const CliOptions& o) {
  const auto p = load_params(o.params_path);
  const FieldChannels lv = to_field_channels(read_waveform_csv_file(o.lv_path));
  const FieldChannels mv = to_field_channels(read_waveform_csv_file(o.mv_path));
  const FieldCompareReport rep = field_compare(lv, mv, p);
  std::cout << rep.samples << " samples at " << g17(rep.fs) << " Hz\n\n";
  std::cout << "errors relative to the reference RMS\n" << render_trial_errors(rep.errors);
  std::cout << "\nerrors normalised to the nameplate scale\n"
            << render_trial_errors(rep.nameplate);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MV-side reconstruction toolkit for distribution transformers"};
  app.set_version_flag("--version", library_version);
  app.require_subcommand(1);
  CliOptions o;

  auto add_params = [&](CLI::App* sub) {
    sub->add_option("--params", o.params_path, "transformer parameter file (key = value)");
  };

  auto* ls = app.add_subcommand("list-scenarios", "print every scenario id in the catalog");
  add_params(ls);

  auto* rs = app.add_subcommand("run-scenario", "Monte-Carlo run of one scenario");
  rs->add_option("--id", o.id, "scenario id, see list-scenarios")->required();
  rs->add_option("--trials", o.trials, "trial cap");
  rs->add_option("--seed", o.seed, "master seed");
  rs->add_flag("--confidence", o.confidence, "stop once every metric settles to 1%");
  rs->add_flag("--study-scale", o.study_scale,
               "17000-trial cap with confidence stopping (long)");
  rs->add_option("--out", o.out_dir, "directory for the CSV report and provenance");
  add_params(rs);

  auto* rm = app.add_subcommand("run-matrix", "run all 24 normal-operation cells");
  rm->add_option("--trials", o.matrix_trials, "trials per cell");
  rm->add_option("--seed", o.seed, "master seed");
  rm->add_option("--out", o.out_dir, "directory for per-cell reports");
  add_params(rm);

  auto* rf = app.add_subcommand("run-faults", "run all 72 fault cells against a baseline");
  rf->add_option("--trials", o.fault_trials, "trials per fault cell");
  rf->add_option("--baseline-trials", o.baseline_trials, "trials for the healthy baseline");
  rf->add_option("--ratio", o.band_ratio, "allowed multiple of the healthy bands");
  rf->add_option("--seed", o.seed, "master seed");
  rf->add_option("--out", o.out_dir, "directory for the fault table");
  add_params(rf);

  auto* fst = app.add_subcommand("filtering-study",
                                 "frequency responses and the load-step spectra");
  fst->add_option("--fs", o.study_fs, "device sample rate for the study");
  fst->add_option("--light", o.light_fraction, "light-load fraction of rated power");
  fst->add_option("--out", o.out_dir, "directory for the study tables");
  add_params(fst);

  auto* tf = app.add_subcommand("twin-file", "stream a recorded LV file through the twin");
  tf->add_option("--lv", o.lv_path, "LV recording (six channels)")->required();
  tf->add_option("--fs", o.fs_check, "expected sample rate; mismatch fails");
  tf->add_option("--out", o.out_path, "output CSV path")->required();
  add_params(tf);

  auto* fc = app.add_subcommand("field-compare",
                                "score an MV recording against the twin of an LV recording");
  fc->add_option("--lv", o.lv_path, "LV recording driving the twin")->required();
  fc->add_option("--mv", o.mv_path, "MV recording used as the reference")->required();
  add_params(fc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (ls->parsed()) return do_list(o);
    if (rs->parsed()) return do_run_scenario(o);
    if (rm->parsed()) return do_run_matrix(o);
    if (rf->parsed()) return do_run_faults(o);
    if (fst->parsed()) return do_filtering_study(o);
    if (tf->parsed()) return do_twin_file(o);
    if (fc->parsed()) return do_field_compare(o);
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
