#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mvtwin/errors.hpp"

namespace mvtwin {

enum class VectorGroup { Yy0, Dy1, Dy11 };

// MV winding connection; the LV winding is wye throughout.
inline bool mv_is_delta(VectorGroup g) { return g != VectorGroup::Yy0; }

inline const char* to_string(VectorGroup g) {
  switch (g) {
    case VectorGroup::Yy0: return "Yy0";
    case VectorGroup::Dy1: return "Dy1";
    case VectorGroup::Dy11: return "Dy11";
  }
  return "?";
}

inline VectorGroup vector_group_from_string(const std::string& s) {
  if (s == "Yy0") return VectorGroup::Yy0;
  if (s == "Dy1") return VectorGroup::Dy1;
  if (s == "Dy11") return VectorGroup::Dy11;
  throw ConfigError("unknown vector group '" + s + "' (expected Yy0, Dy1 or Dy11)");
}

// Nameplate and equivalent-circuit constants. Side 1 is the LV measurement
// side, side 2 the MV side; impedances are per-unit on the rated base and l
// values mean reactance at base_frequency.
struct TransformerParams {
  double s_rated = 0.0;    // VA
  double v1_rated = 0.0;   // LV line-to-line, V
  double v2_rated = 0.0;   // MV line-to-line, V
  double r1 = 0.0, l1 = 0.0;
  double r2 = 0.0, l2 = 0.0;
  double rm = 0.0, lm = 0.0;
  double tap_ratio = 1.0;
  double tap_min = 0.9, tap_max = 1.1;
  VectorGroup vector_group = VectorGroup::Dy11;
  double base_frequency = 50.0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string("transformer parameter ") + name + " must be positive");
    };
    positive(s_rated, "s_rated");
    positive(v1_rated, "v1_rated");
    positive(v2_rated, "v2_rated");
    positive(r1, "r1");
    positive(l1, "l1");
    positive(r2, "r2");
    positive(l2, "l2");
    positive(rm, "rm");
    positive(lm, "lm");
    positive(base_frequency, "f0");
    if (!(v1_rated < v2_rated))
      throw ConfigError("v1_rated must be below v2_rated (side 1 is the LV side)");
    if (!(tap_min <= tap_ratio && tap_ratio <= tap_max))
      throw ConfigError("tap_ratio " + std::to_string(tap_ratio) + " outside [" +
                        std::to_string(tap_min) + ", " + std::to_string(tap_max) + "]");
  }

  double ratio() const { return v2_rated / v1_rated * tap_ratio; }
  double winding_factor() const { return mv_is_delta(vector_group) ? std::numbers::sqrt3 : 1.0; }
  // turns ratio between the coupled windings (delta MV winding sees the full
  // line-to-line voltage, so the per-leg ratio carries a sqrt(3))
  double winding_ratio() const { return winding_factor() * ratio(); }

  // impedance bases at the winding level; the MV one tracks the tap because
  // referred ohms scale with the square of the turns in service
  double z_base_lv() const { return v1_rated * v1_rated / s_rated; }
  double z_base_mv_winding() const {
    const double k = winding_factor();
    return k * k * (v2_rated * v2_rated / s_rated) * tap_ratio * tap_ratio;
  }

  TransformerParams with_tap(double tap) const {
    if (!(tap_min <= tap && tap <= tap_max))
      throw ConfigError("tap " + std::to_string(tap) + " outside [" + std::to_string(tap_min) +
                        ", " + std::to_string(tap_max) + "]");
    TransformerParams p = *this;
    p.tap_ratio = tap;
    return p;
  }
};

// voltage steps up by the ratio, current steps down
struct ReferredSample {
  double u = 0.0;
  double i = 0.0;
};

inline ReferredSample refer_to_mv(double lv_u, double lv_i, double ratio) {
  return {lv_u * ratio, lv_i / ratio};
}

inline ReferredSample refer_to_mv(double lv_u, double lv_i, const TransformerParams& p) {
  return refer_to_mv(lv_u, lv_i, p.ratio());
}

// Lumped constants of the reconstruction model in physical units at the MV
// winding: series elements carry the summed winding impedances, the shunt
// pair models the magnetising branch.
struct TwinCoeffs {
  double r_s = 0.0;  // ohm
  double l_s = 0.0;  // henry
  double r_m = std::numeric_limits<double>::infinity();
  double l_m = std::numeric_limits<double>::infinity();
};

inline TwinCoeffs twin_coeffs(const TransformerParams& p) {
  p.validate();
  const double zb = p.z_base_mv_winding();
  const double w0 = 2.0 * std::numbers::pi * p.base_frequency;
  return {(p.r1 + p.r2) * zb, (p.l1 + p.l2) * zb / w0, p.rm * zb, p.lm * zb / w0};
}

}  // namespace mvtwin
