#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mvtwin/errors.hpp"
#include "mvtwin/scenario.hpp"

namespace mvtwin {

namespace detail {

inline std::string_view cfg_trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline double cfg_number(std::string_view tok, int line) {
  tok = cfg_trim(tok);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size())
    throw ParseError("not a number: '" + std::string(tok) + "'", line);
  if (!std::isfinite(v)) throw ParseError("value is not finite", line);
  return v;
}

// key = value lines, full-line or trailing '#' comments, blank lines skipped
template <typename Fn>
inline void cfg_lines(std::istream& in, Fn&& on_kv) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv(line);
    const auto hash = sv.find('#');
    if (hash != std::string_view::npos) sv = sv.substr(0, hash);
    sv = cfg_trim(sv);
    if (sv.empty()) continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("expected 'key = value'", line_no);
    const std::string_view key = cfg_trim(sv.substr(0, eq));
    const std::string_view val = cfg_trim(sv.substr(eq + 1));
    if (key.empty() || val.empty()) throw ParseError("empty key or value", line_no);
    on_kv(key, val, line_no);
  }
}

}  // namespace detail

inline VectorGroup vector_group_from(std::string_view name, int line) {
  if (name == "Yy0") return VectorGroup::Yy0;
  if (name == "Dy1") return VectorGroup::Dy1;
  if (name == "Dy11") return VectorGroup::Dy11;
  throw ParseError("unknown vector group '" + std::string(name) + "'", line);
}

inline TransformerParams read_params(std::istream& in) {
  TransformerParams p;
  std::vector<std::string> seen;
  detail::cfg_lines(in, [&](std::string_view key, std::string_view val, int line) {
    for (const auto& s : seen)
      if (s == key) throw ParseError("duplicate key '" + std::string(key) + "'", line);
    seen.emplace_back(key);
    if (key == "vector_group") {
      p.vector_group = vector_group_from(val, line);
      return;
    }
    const double v = detail::cfg_number(val, line);
    if (key == "s_rated")
      p.s_rated = v;
    else if (key == "v1_rated")
      p.v1_rated = v;
    else if (key == "v2_rated")
      p.v2_rated = v;
    else if (key == "r1")
      p.r1 = v;
    else if (key == "l1")
      p.l1 = v;
    else if (key == "r2")
      p.r2 = v;
    else if (key == "l2")
      p.l2 = v;
    else if (key == "rm")
      p.rm = v;
    else if (key == "lm")
      p.lm = v;
    else if (key == "tap")
      p.tap_ratio = v;
    else if (key == "tap_min")
      p.tap_min = v;
    else if (key == "tap_max")
      p.tap_max = v;
    else if (key == "base_frequency")
      p.base_frequency = v;
    else
      throw ParseError("unknown key '" + std::string(key) + "'", line);
  });
  p.validate();
  return p;
}

inline void write_params(std::ostream& out, const TransformerParams& p) {
  auto g = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "s_rated = " << g(p.s_rated) << "\n";
  out << "v1_rated = " << g(p.v1_rated) << "\n";
  out << "v2_rated = " << g(p.v2_rated) << "\n";
  out << "r1 = " << g(p.r1) << "\n";
  out << "l1 = " << g(p.l1) << "\n";
  out << "r2 = " << g(p.r2) << "\n";
  out << "l2 = " << g(p.l2) << "\n";
  out << "rm = " << g(p.rm) << "\n";
  out << "lm = " << g(p.lm) << "\n";
  out << "tap = " << g(p.tap_ratio) << "\n";
  out << "tap_min = " << g(p.tap_min) << "\n";
  out << "tap_max = " << g(p.tap_max) << "\n";
  out << "vector_group = " << to_string(p.vector_group) << "\n";
  out << "base_frequency = " << g(p.base_frequency) << "\n";
}

inline TransformerParams read_params_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  return read_params(f);
}

// Harmonic profiles: one `h<order> = fraction` line per tone.
inline std::vector<HarmonicTone> read_harmonic_profile(std::istream& in) {
  std::vector<HarmonicTone> out;
  detail::cfg_lines(in, [&](std::string_view key, std::string_view val, int line) {
    if (key.size() < 2 || key.front() != 'h')
      throw ParseError("expected 'h<order> = fraction'", line);
    int order = 0;
    const auto r = std::from_chars(key.data() + 1, key.data() + key.size(), order);
    if (r.ec != std::errc{} || r.ptr != key.data() + key.size() || order < 2)
      throw ParseError("harmonic order must be an integer >= 2", line);
    for (const auto& t : out)
      if (t.order == order) throw ParseError("duplicate order h" + std::to_string(order), line);
    const double frac = detail::cfg_number(val, line);
    if (frac < 0.0) throw ParseError("fraction must be >= 0", line);
    out.push_back({order, frac});
  });
  std::sort(out.begin(), out.end(),
            [](const HarmonicTone& a, const HarmonicTone& b) { return a.order < b.order; });
  return out;
}

inline void write_harmonic_profile(std::ostream& out, const std::vector<HarmonicTone>& profile) {
  for (const auto& t : profile) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", t.fraction);
    out << "h" << t.order << " = " << buf << "\n";
  }
}

inline std::vector<HarmonicTone> read_harmonic_profile_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  return read_harmonic_profile(f);
}

}  // namespace mvtwin
