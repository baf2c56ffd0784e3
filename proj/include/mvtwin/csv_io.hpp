#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mvtwin/errors.hpp"
#include "mvtwin/harness.hpp"

namespace mvtwin {

// Waveform interchange: comment lines carry the grid and bookkeeping, one
// column per channel, decimal point, no thousands separators. The time
// column, when present, must sit exactly on the declared grid.
inline constexpr std::array<std::string_view, 7> kCsvChannels = {"t",  "uA", "uB", "uC",
                                                                 "iA", "iB", "iC"};

struct CsvRecord {
  double fs = 0.0;
  double t0 = 0.0;
  std::vector<std::string> comments;       // free-form, embedded on write
  std::vector<std::string> columns;        // channel names, time column excluded
  std::vector<std::vector<double>> data;   // one vector per channel
  std::size_t rows() const { return data.empty() ? 0 : data[0].size(); }
  const std::vector<double>* find(std::string_view name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (columns[k] == name) return &data[k];
    return nullptr;
  }
};

namespace detail {

inline std::string_view csv_trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> csv_split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t k = 0; k <= s.size(); ++k) {
    if (k == s.size() || s[k] == sep) {
      out.push_back(s.substr(start, k - start));
      start = k + 1;
    }
  }
  return out;
}

inline double csv_number(std::string_view tok, int line) {
  tok = csv_trim(tok);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size())
    throw ParseError("not a number: '" + std::string(tok) + "'", line);
  if (!std::isfinite(v)) throw ParseError("sample is not finite", line);
  return v;
}

inline bool known_channel(std::string_view name) {
  return std::find(kCsvChannels.begin(), kCsvChannels.end(), name) != kCsvChannels.end();
}

inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline CsvRecord read_waveform_csv(std::istream& in) {
  using detail::csv_number;
  using detail::csv_split;
  using detail::csv_trim;
  CsvRecord rec;
  bool have_fs = false, have_t0 = false;
  long declared = -1;
  std::vector<std::string> names;
  std::size_t t_col = static_cast<std::size_t>(-1);
  std::size_t row = 0;
  std::string line;
  int line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view sv = csv_trim(line);
    if (sv.empty()) continue;
    if (sv.front() == '#') {
      const std::string_view body = csv_trim(sv.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos) {
        const std::string_view key = csv_trim(body.substr(0, eq));
        const std::string_view val = csv_trim(body.substr(eq + 1));
        if (key == "fs") {
          rec.fs = csv_number(val, line_no);
          if (!(rec.fs > 0.0)) throw ParseError("fs must be positive", line_no);
          have_fs = true;
        } else if (key == "t0") {
          rec.t0 = csv_number(val, line_no);
          have_t0 = true;
        } else if (key == "samples") {
          declared = std::lround(csv_number(val, line_no));
          if (declared < 0) throw ParseError("sample count must be >= 0", line_no);
        } else if (key == "units") {
          for (const auto tok : csv_split(val, ','))
            if (csv_trim(tok) != "V" && csv_trim(tok) != "A")
              throw ParseError("unit must be V or A", line_no);
        }
        // other keyed comments are provenance; carried along untouched
        else
          rec.comments.emplace_back(body);
      } else if (!body.empty() && body != "mvtwin-waveform v1") {
        rec.comments.emplace_back(body);
      }
      continue;
    }
    if (names.empty()) {
      for (const auto tok : csv_split(sv, ',')) {
        std::string name(csv_trim(tok));
        if (!detail::known_channel(name))
          throw ParseError("unknown channel '" + name + "'", line_no);
        if (std::find(names.begin(), names.end(), name) != names.end())
          throw ParseError("duplicate channel '" + name + "'", line_no);
        if (name == "t") t_col = names.size();
        names.push_back(std::move(name));
      }
      if (!have_fs) throw ParseError("missing '# fs=<Hz>' header", line_no);
      for (std::size_t k = 0; k < names.size(); ++k)
        if (k != t_col) rec.columns.push_back(names[k]);
      if (rec.columns.empty()) throw ParseError("no signal channels declared", line_no);
      rec.data.resize(rec.columns.size());
      continue;
    }
    const auto toks = csv_split(sv, ',');
    if (toks.size() != names.size())
      throw ParseError("expected " + std::to_string(names.size()) + " fields, got " +
                           std::to_string(toks.size()),
                       line_no);
    std::size_t ci = 0;
    for (std::size_t k = 0; k < toks.size(); ++k) {
      const double v = csv_number(toks[k], line_no);
      if (k == t_col) {
        if (row == 0 && !have_t0) rec.t0 = v;
        const double want = rec.t0 + static_cast<double>(row) / rec.fs;
        if (std::abs(v - want) > 1e-9)
          throw ParseError("time stamp off the declared grid", line_no);
      } else {
        rec.data[ci++].push_back(v);
      }
    }
    ++row;
  }
  if (names.empty()) throw ParseError("missing column header", line_no ? line_no : 1);
  if (row == 0) throw ParseError("no data rows", line_no);
  if (declared >= 0 && static_cast<std::size_t>(declared) != row)
    throw ParseError("declared sample count " + std::to_string(declared) + " but read " +
                         std::to_string(row),
                     line_no);
  return rec;
}

inline void write_waveform_csv(std::ostream& out, const CsvRecord& rec, bool with_time = true) {
  if (!(rec.fs > 0.0)) throw ConfigError("write_waveform_csv: fs must be positive");
  if (rec.columns.size() != rec.data.size() || rec.columns.empty())
    throw ConfigError("write_waveform_csv: channel names and data disagree");
  const std::size_t n = rec.rows();
  for (const auto& col : rec.data)
    if (col.size() != n) throw ConfigError("write_waveform_csv: ragged channels");
  for (const auto& name : rec.columns)
    if (!detail::known_channel(name) || name == "t")
      throw ConfigError("write_waveform_csv: unknown channel '" + name + "'");

  out << "# mvtwin-waveform v1\n";
  for (const auto& c : rec.comments) out << "# " << c << "\n";
  out << "# fs=" << detail::g17(rec.fs) << "\n";
  out << "# t0=" << detail::g17(rec.t0) << "\n";
  out << "# samples=" << n << "\n";
  out << "# units=V,A\n";
  if (with_time) out << "t,";
  for (std::size_t k = 0; k < rec.columns.size(); ++k)
    out << rec.columns[k] << (k + 1 < rec.columns.size() ? "," : "\n");
  for (std::size_t i = 0; i < n; ++i) {
    if (with_time) out << detail::g17(rec.t0 + static_cast<double>(i) / rec.fs) << ",";
    for (std::size_t k = 0; k < rec.data.size(); ++k)
      out << detail::g17(rec.data[k][i]) << (k + 1 < rec.data.size() ? "," : "\n");
  }
}

inline CsvRecord read_waveform_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  return read_waveform_csv(f);
}

inline void write_waveform_csv_file(const std::string& path, const CsvRecord& rec,
                                    bool with_time = true) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  write_waveform_csv(f, rec, with_time);
}

// The six-channel layout the comparison and twin front ends expect.
inline FieldChannels to_field_channels(const CsvRecord& rec) {
  FieldChannels fc;
  fc.fs = rec.fs;
  fc.t0 = rec.t0;
  const std::array<std::string_view, 3> un = {"uA", "uB", "uC"};
  const std::array<std::string_view, 3> in = {"iA", "iB", "iC"};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto* u = rec.find(un[k]);
    const auto* i = rec.find(in[k]);
    if (!u || !i)
      throw ConfigError("record lacks channel " + std::string(u ? in[k] : un[k]));
    fc.u[k] = *u;
    fc.i[k] = *i;
  }
  return fc;
}

inline CsvRecord from_field_channels(const FieldChannels& fc) {
  CsvRecord rec;
  rec.fs = fc.fs;
  rec.t0 = fc.t0;
  rec.columns = {"uA", "uB", "uC", "iA", "iB", "iC"};
  rec.data = {fc.u[0], fc.u[1], fc.u[2], fc.i[0], fc.i[1], fc.i[2]};
  return rec;
}

// ---------------------------------------------------------------------------
// Report persistence: one row per (quantity, metric, statistic), with the
// provenance needed to regenerate the numbers embedded up front.

inline std::string provenance_text(const RunReport& rep) {
  std::string out;
  out += "scenario=" + rep.scenario_id + "\n";
  out += "seed=" + std::to_string(rep.master_seed) + "\n";
  out += "trials=" + std::to_string(rep.trials) + "\n";
  out += "fs=" + detail::g17(rep.fs) + "\n";
  out += "dt=" + detail::g17(rep.dt) + "\n";
  out += "version=" + rep.version + "\n";
  out += std::string("stopped_on_confidence=") + (rep.stopped_on_confidence ? "1" : "0") + "\n";
  return out;
}

inline std::string report_csv(const RunReport& rep) {
  std::string out;
  out += "# scenario=" + rep.scenario_id + "\n";
  out += "# seed=" + std::to_string(rep.master_seed) + "\n";
  out += "# trials=" + std::to_string(rep.trials) + "\n";
  out += "# fs=" + detail::g17(rep.fs) + "\n";
  out += "# dt=" + detail::g17(rep.dt) + "\n";
  out += "# version=" + rep.version + "\n";
  out += "quantity,metric,statistic,value\n";
  const std::array<std::pair<const char*, const QuantityStats*>, 7> rows = {{
      {"v_line", &rep.stats.v_line},
      {"v_phase", &rep.stats.v_phase},
      {"i_line", &rep.stats.i_line},
      {"p", &rep.stats.p},
      {"q", &rep.stats.q},
      {"f_v", &rep.stats.f_v},
      {"f_i", &rep.stats.f_i},
  }};
  for (const auto& [name, qs] : rows) {
    const std::string base(name);
    out += base + ",avg,mean," + detail::g17(qs->headline_avg.mean()) + "\n";
    out += base + ",avg,max," + detail::g17(qs->headline_avg.max()) + "\n";
    out += base + ",avg,min," + detail::g17(qs->headline_avg.min()) + "\n";
    out += base + ",avg,flagged," + std::to_string(qs->headline_avg.n_all - qs->headline_avg.n) +
           "\n";
    if (qs->has_max_point)
      out += base + ",maxpt,mean," + detail::g17(qs->headline_max.mean()) + "\n";
  }
  return out;
}

}  // namespace mvtwin
