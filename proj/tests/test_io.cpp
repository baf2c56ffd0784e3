#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mvtwin/config_io.hpp"
#include "mvtwin/csv_io.hpp"
#include "oracles.hpp"

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

int parse_error_line(const std::string& text, auto&& fn) {
  std::istringstream in(text);
  try {
    fn(in);
  } catch (const ParseError& e) {
    return e.line;
  }
  return -1;
}

// Balanced LV sine set: phase voltage amplitude au, current ai lagging phi.
CsvRecord sine_record(double fs, std::size_t n, double au, double ai, double phi) {
  CsvRecord rec;
  rec.fs = fs;
  rec.columns = {"uA", "uB", "uC", "iA", "iB", "iC"};
  rec.data.assign(6, std::vector<double>(n));
  for (std::size_t k = 0; k < 3; ++k) {
    const double psi = -2.0 * std::numbers::pi * static_cast<double>(k) / 3.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double wt = 2.0 * std::numbers::pi * 50.0 * static_cast<double>(i) / fs + psi;
      rec.data[k][i] = au * std::sin(wt);
      rec.data[3 + k][i] = ai * std::sin(wt - phi);
    }
  }
  return rec;
}

struct CmdResult {
  int status = -1;
  std::string out;
};

CmdResult run_cmd(const std::string& cmd) {
  CmdResult r;
  FILE* p = popen((cmd + " 2>&1").c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int rc = pclose(p);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

std::filesystem::path temp_file(const std::string& tag) {
  return std::filesystem::temp_directory_path() /
         ("mvtwin-io-" + std::to_string(::getpid()) + "-" + tag);
}

}  // namespace

TEST_CASE("a three-row file yields six channels of length three") {
  const std::string text =
      "# fs=1000\n"
      "t,uA,uB,uC,iA,iB,iC\n"
      "0,1,2,3,4,5,6\n"
      "0.001,1.5,2.5,3.5,4.5,5.5,6.5\n"
      "0.002,-1,-2,-3,-4,-5,-6\n";
  std::istringstream in(text);
  const CsvRecord rec = read_waveform_csv(in);
  REQUIRE(rec.fs == 1000.0);
  REQUIRE(rec.t0 == 0.0);
  REQUIRE(rec.columns.size() == 6);
  REQUIRE(rec.rows() == 3);
  REQUIRE(rec.find("uB") != nullptr);
  REQUIRE((*rec.find("uB"))[1] == 2.5);
  REQUIRE((*rec.find("iC"))[2] == -6.0);
  const FieldChannels fc = to_field_channels(rec);
  REQUIRE(fc.u[0].size() == 3);
  REQUIRE(fc.i[2][0] == 6.0);
}

TEST_CASE("channel subsets parse but the comparison front end wants all six") {
  const std::string text =
      "# fs=500\n"
      "uA,iA\n"
      "1,2\n"
      "3,4\n";
  std::istringstream in(text);
  const CsvRecord rec = read_waveform_csv(in);
  REQUIRE(rec.columns == std::vector<std::string>{"uA", "iA"});
  REQUIRE(rec.t0 == 0.0);
  REQUIRE_THROWS_AS(to_field_channels(rec), ConfigError);
}

TEST_CASE("the time column must sit on the declared grid") {
  const std::string text =
      "# fs=1000\n"
      "t,uA\n"
      "0,1\n"
      "0.001,2\n"
      "0.0025,3\n";
  REQUIRE(parse_error_line(text, [](std::istream& in) { read_waveform_csv(in); }) == 5);
}

TEST_CASE("malformed files are rejected with their line numbers") {
  auto line_of = [](const std::string& text) {
    return parse_error_line(text, [](std::istream& in) { read_waveform_csv(in); });
  };
  SECTION("missing fs header") {
    REQUIRE(line_of("uA\n1\n") == 1);
  }
  SECTION("NaN cell") {
    REQUIRE(line_of("# fs=10\nuA\n1\nnan\n") == 4);
  }
  SECTION("text cell") {
    REQUIRE(line_of("# fs=10\nuA\n1\ntwo\n") == 4);
  }
  SECTION("field count mismatch") {
    REQUIRE(line_of("# fs=10\nuA,uB\n1,2\n3\n") == 4);
  }
  SECTION("unknown channel") {
    REQUIRE(line_of("# fs=10\nuA,volts\n1,2\n") == 2);
  }
  SECTION("duplicate channel") {
    REQUIRE(line_of("# fs=10\nuA,uA\n1,2\n") == 2);
  }
  SECTION("time-only file") {
    REQUIRE(line_of("# fs=10\nt\n0\n") == 2);
  }
  SECTION("no data rows") {
    REQUIRE(line_of("# fs=10\nuA\n") == 2);
  }
  SECTION("declared count disagreeing with the body") {
    REQUIRE(line_of("# fs=10\n# samples=3\nuA\n1\n2\n") == 5);
  }
  SECTION("unit outside volts and amperes") {
    REQUIRE(line_of("# fs=10\n# units=V,W\nuA\n1\n") == 2);
  }
  SECTION("non-positive rate") {
    REQUIRE(line_of("# fs=0\nuA\n1\n") == 1);
  }
}

TEST_CASE("write then read preserves every sample bit-exactly") {
  CsvRecord rec;
  rec.fs = 13.2e3;
  rec.t0 = 0.005;
  rec.comments = {"source=unit-test"};
  rec.columns = {"uA", "uB", "uC", "iA", "iB", "iC"};
  const std::vector<double> awkward = {0.1,      1.0 / 3.0,  -0.0,       1e-17,
                                       -2.5e8,   std::numbers::pi, 6.02e23,    -1.0 / 7.0};
  rec.data.assign(6, {});
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t i = 0; i < awkward.size(); ++i)
      rec.data[k].push_back(awkward[(i + k) % awkward.size()] * (k % 2 ? -1.0 : 1.0));

  std::ostringstream out;
  write_waveform_csv(out, rec);
  std::istringstream in(out.str());
  const CsvRecord back = read_waveform_csv(in);
  REQUIRE(back.fs == rec.fs);
  REQUIRE(back.t0 == rec.t0);
  REQUIRE(back.columns == rec.columns);
  REQUIRE(back.comments == rec.comments);
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t i = 0; i < rec.data[k].size(); ++i) {
      REQUIRE(std::memcmp(&back.data[k][i], &rec.data[k][i], sizeof(double)) == 0);
    }

  // a second round trip writes the identical byte stream
  std::ostringstream again;
  write_waveform_csv(again, back);
  REQUIRE(again.str() == out.str());
}

TEST_CASE("params files round-trip and reject what the model rejects") {
  const auto p = bench_params(VectorGroup::Dy1);
  std::ostringstream out;
  write_params(out, p);
  std::istringstream in(out.str());
  const TransformerParams back = read_params(in);
  REQUIRE(back.s_rated == p.s_rated);
  REQUIRE(back.v2_rated == p.v2_rated);
  REQUIRE(back.l1 == p.l1);
  REQUIRE(back.vector_group == VectorGroup::Dy1);
  REQUIRE(back.tap_ratio == p.tap_ratio);

  auto line_of = [](const std::string& text) {
    return parse_error_line(text, [](std::istream& in2) { read_params(in2); });
  };
  REQUIRE(line_of("bogus = 1\n") == 1);
  REQUIRE(line_of("s_rated = 1\ns_rated = 2\n") == 2);
  REQUIRE(line_of("s_rated\n") == 1);
  REQUIRE(line_of("vector_group = Yd11\n") == 1);
  REQUIRE(line_of("s_rated = 5e4 # rating\nr1 = pretty small\n") == 2);

  std::istringstream bad(
      "s_rated = 50e3\nv1_rated = 20e3\nv2_rated = 400\nr1 = 0.0075\nl1 = 0.02\n"
      "r2 = 0.0075\nl2 = 0.02\nrm = 500\nlm = 500\n");
  REQUIRE_THROWS_AS(read_params(bad), ConfigError);
}

TEST_CASE("harmonic profiles parse ordered and validated") {
  std::istringstream in("h5 = 0.06\nh3 = 0.05 # triplen\nh25 = 0.015\n");
  const auto prof = read_harmonic_profile(in);
  REQUIRE(prof.size() == 3);
  REQUIRE(prof[0].order == 3);
  REQUIRE(prof[1].order == 5);
  REQUIRE(prof[2].order == 25);
  REQUIRE(prof[0].fraction == 0.05);

  auto line_of = [](const std::string& text) {
    return parse_error_line(text, [](std::istream& in2) { read_harmonic_profile(in2); });
  };
  REQUIRE(line_of("h3 = 0.05\nh3 = 0.06\n") == 2);
  REQUIRE(line_of("h1 = 0.05\n") == 1);
  REQUIRE(line_of("k3 = 0.05\n") == 1);
  REQUIRE(line_of("h3 = -0.05\n") == 1);

  std::ostringstream out;
  write_harmonic_profile(out, default_harmonic_profile());
  std::istringstream back_in(out.str());
  const auto back = read_harmonic_profile(back_in);
  REQUIRE(back.size() == default_harmonic_profile().size());
  REQUIRE(back[0].order == default_harmonic_profile()[0].order);
  REQUIRE(back[0].fraction == default_harmonic_profile()[0].fraction);
}

TEST_CASE("reports persist with their provenance") {
  const auto cfg = scenario_by_id("N-c-h0-30k", bench_params());
  RunOptions opt;
  opt.master_seed = 42;
  opt.trials = 2;
  const RunReport rep = run_scenario(cfg, opt);

  const std::string prov = provenance_text(rep);
  REQUIRE(prov.find("scenario=N-c-h0-30k\n") != std::string::npos);
  REQUIRE(prov.find("seed=42\n") != std::string::npos);
  REQUIRE(prov.find("trials=2\n") != std::string::npos);
  REQUIRE(prov.find("version=") != std::string::npos);

  const std::string csv = report_csv(rep);
  REQUIRE(csv.find("# scenario=N-c-h0-30k\n") != std::string::npos);
  REQUIRE(csv.find("# dt=") != std::string::npos);
  REQUIRE(csv.find("quantity,metric,statistic,value\n") != std::string::npos);
  for (const char* q : {"v_line", "v_phase", "i_line", "p", "q", "f_v", "f_i"}) {
    REQUIRE(csv.find(std::string(q) + ",avg,mean,") != std::string::npos);
    REQUIRE(csv.find(std::string(q) + ",avg,flagged,") != std::string::npos);
  }
  REQUIRE(csv.find("v_line,maxpt,mean,") != std::string::npos);
  REQUIRE(csv.find("f_v,maxpt,") == std::string::npos);

  // bit-identical on a re-run with the same options
  REQUIRE(report_csv(run_scenario(cfg, opt)) == csv);
}

TEST_CASE("a pure sine through the file pipeline matches the phasor oracle") {
  const auto p = bench_params(VectorGroup::Yy0);
  const double fs = 13.2e3;
  const double w = 2.0 * std::numbers::pi * p.base_frequency;
  const double au = std::numbers::sqrt2 * p.v1_rated / std::numbers::sqrt3;
  const double ai = std::numbers::sqrt2 * 70.0;
  const double phi = 0.6435;
  const std::size_t n = static_cast<std::size_t>(std::llround(0.25 * fs));

  const CsvRecord rec = sine_record(fs, n, au, ai, phi);
  std::ostringstream out;
  write_waveform_csv(out, rec);
  std::istringstream in(out.str());
  const FieldChannels lv = to_field_channels(read_waveform_csv(in));

  ThreePhaseTwin twin(p, fs);
  std::vector<double> est(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto o = twin.step({lv.u[0][i], lv.u[1][i], lv.u[2][i]},
                             {lv.i[0][i], lv.i[1][i], lv.i[2][i]});
    est[i] = o.u_phase_est[0];
  }

  const auto c = twin_coeffs(p);
  const double a_w = p.winding_ratio();
  const std::complex<double> u1 = au * a_w;
  const std::complex<double> i1 = ai / a_w * std::exp(std::complex<double>(0.0, -phi));
  const auto pred = oracle::twin_continuous(c, u1, i1, w);

  const auto spc = static_cast<std::size_t>(std::llround(fs / p.base_frequency));
  const SampleRange tail{n - 5 * spc, n};
  const double est_amp = std::numbers::sqrt2 * rms(est, tail);
  REQUIRE(est_amp == Catch::Approx(std::abs(pred.u2)).epsilon(0.002));
}

#ifdef MVTWIN_CLI_PATH
TEST_CASE("the command line front end honours its exit codes") {
  const std::string cli = MVTWIN_CLI_PATH;

  SECTION("scenario listing covers the whole catalog") {
    const CmdResult r = run_cmd(cli + " list-scenarios");
    REQUIRE(r.status == 0);
    std::istringstream lines(r.out);
    std::string line;
    int ids = 0;
    while (std::getline(lines, line))
      if (!line.empty() && line[0] != '#') ++ids;
    REQUIRE(ids == 96);
    REQUIRE(r.out.find("N-c-h0-30k") != std::string::npos);
    REQUIRE(r.out.find("F-llg-lv-ung-yyuu") != std::string::npos);
  }

  SECTION("validation failures exit with 1") {
    REQUIRE(run_cmd(cli + " run-scenario --id not-a-cell --trials 1").status == 1);
    REQUIRE(run_cmd(cli + " definitely-not-a-subcommand").status == 1);
    REQUIRE(run_cmd(cli + " twin-file --lv /nonexistent.csv --out /tmp/x.csv").status == 1);
    REQUIRE(run_cmd(cli + " run-scenario --id N-c-h0-30k --bogus-flag").status == 1);
  }

  SECTION("a recording streams through the twin deterministically") {
    const auto lv_path = temp_file("lv.csv");
    const auto out1 = temp_file("mv1.csv");
    const auto out2 = temp_file("mv2.csv");
    const CsvRecord rec = sine_record(13.2e3, 1320, 326.6, 99.0, 0.64);
    write_waveform_csv_file(lv_path.string(), rec);

    const std::string base = cli + " twin-file --lv " + lv_path.string();
    REQUIRE(run_cmd(base + " --out " + out1.string()).status == 0);
    REQUIRE(run_cmd(base + " --out " + out2.string()).status == 0);

    std::ifstream f1(out1), f2(out2);
    std::stringstream b1, b2;
    b1 << f1.rdbuf();
    b2 << f2.rdbuf();
    REQUIRE(b1.str() == b2.str());
    REQUIRE_FALSE(b1.str().empty());

    const CsvRecord mv = read_waveform_csv_file(out1.string());
    REQUIRE(mv.rows() == rec.rows());
    REQUIRE(mv.fs == rec.fs);
    REQUIRE(to_field_channels(mv).u[0].size() == rec.rows());

    // declared rate disagreeing with the file is a validation failure
    REQUIRE(run_cmd(base + " --fs 9999 --out " + out2.string()).status == 1);

    std::filesystem::remove(lv_path);
    std::filesystem::remove(out1);
    std::filesystem::remove(out2);
  }

  SECTION("misaligned field records fail validation") {
    const auto a = temp_file("fa.csv");
    const auto b = temp_file("fb.csv");
    write_waveform_csv_file(a.string(), sine_record(10e3, 1000, 326.6, 99.0, 0.6));
    write_waveform_csv_file(b.string(), sine_record(13.2e3, 1000, 326.6, 99.0, 0.6));
    const CmdResult r =
        run_cmd(cli + " field-compare --lv " + a.string() + " --mv " + b.string());
    REQUIRE(r.status == 1);
    std::filesystem::remove(a);
    std::filesystem::remove(b);
  }
}
#endif
