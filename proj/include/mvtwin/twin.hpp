#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "mvtwin/errors.hpp"
#include "mvtwin/transformer.hpp"

namespace mvtwin {

// Per-sample reconstruction of one MV winding's voltage and current from the
// referred LV samples. Pure two-tap feed-forward recursion: the series drop
// uses a backward difference of the current, the shunt current a backward
// difference of the reconstructed voltage. The first two outputs depend on
// seeded history and are flagged as warm-up.
class SinglePhaseTwin {
 public:
  SinglePhaseTwin(TwinCoeffs coeffs, double fs) : c_(coeffs), fs_(fs) {
    if (!(fs > 0.0)) throw ConfigError("twin sample rate must be positive");
  }

  struct Output {
    double u2 = 0.0;
    double i2 = 0.0;
    bool warmup = false;
  };

  // r_scale optionally rescales both resistive elements for the step, e.g.
  // to impose a temperature trajectory; inductances are untouched.
  Output step(double u1_ref, double i1_ref, double r_scale = 1.0) {
    if (steps_ == 0) prev_i1_ = i1_ref;
    const double u2 =
        u1_ref + c_.r_s * r_scale * i1_ref + c_.l_s * (i1_ref - prev_i1_) * fs_;
    if (steps_ == 0) prev_u2_ = u2;
    const double i2 = u2 / (c_.r_m * r_scale) + (u2 - prev_u2_) / (c_.l_m * fs_) + i1_ref;
    const bool warmup = steps_ < 2;
    prev_i1_ = i1_ref;
    prev_u2_ = u2;
    ++steps_;
    return {u2, i2, warmup};
  }

  // Swap constants mid-stream (tap step, temperature update); history is kept
  // so the next two outputs mix old and new constants but stay finite.
  void set_coeffs(TwinCoeffs coeffs) { c_ = coeffs; }
  void reset() {
    steps_ = 0;
    prev_i1_ = 0.0;
    prev_u2_ = 0.0;
  }
  const TwinCoeffs& coeffs() const { return c_; }
  double fs() const { return fs_; }

 private:
  TwinCoeffs c_;
  double fs_;
  double prev_i1_ = 0.0;
  double prev_u2_ = 0.0;
  std::int64_t steps_ = 0;
};

// MV-side frame composed from the three per-winding reconstructions. Line
// quantities are always defined; phase-to-neutral voltages only exist
// natively for a wye MV winding.
struct MvFrame {
  std::array<double, 3> u_line{};   // ab, bc, ca
  std::array<double, 3> i_line{};   // a, b, c
  std::array<double, 3> u_phase{};  // a, b, c, valid iff has_phase
  bool has_phase = false;
};

namespace detail {
inline constexpr std::size_t nxt(std::size_t k) { return (k + 1) % 3; }
inline constexpr std::size_t prv(std::size_t k) { return (k + 2) % 3; }
}  // namespace detail

// Delta winding orientation fixes which two phases each winding spans: the
// 30 degree lead (Dy11) pairs winding k with phase k+1, the 30 degree lag
// (Dy1) with phase k-1. Line currents follow from the node balance at each
// delta corner, so they are exact functionals of the winding currents.
inline MvFrame compose_three_phase(const std::array<double, 3>& u2,
                                   const std::array<double, 3>& i2, VectorGroup group) {
  using detail::nxt;
  using detail::prv;
  MvFrame f;
  switch (group) {
    case VectorGroup::Yy0:
      f.u_phase = u2;
      f.has_phase = true;
      f.i_line = i2;
      for (std::size_t k = 0; k < 3; ++k) f.u_line[k] = u2[k] - u2[nxt(k)];
      return f;
    case VectorGroup::Dy1:
      for (std::size_t k = 0; k < 3; ++k) {
        f.u_line[k] = (u2[k] - u2[prv(k)]) / std::numbers::sqrt3;
        f.i_line[k] = i2[k] - i2[prv(k)];
      }
      return f;
    case VectorGroup::Dy11:
      for (std::size_t k = 0; k < 3; ++k) {
        f.u_line[k] = (u2[k] - u2[nxt(k)]) / std::numbers::sqrt3;
        f.i_line[k] = i2[k] - i2[nxt(k)];
      }
      return f;
  }
  throw ConfigError("unknown vector group");
}

// Phase-to-neutral voltage estimates for every group: native winding voltages
// for wye, and the neutral-free reconstruction u_line/sqrt(3) for delta. The
// delta form equals phase voltage minus the instantaneous zero-sequence
// voltage, which a delta winding cannot observe.
inline std::array<double, 3> phase_voltage_estimates(const MvFrame& f, VectorGroup group) {
  if (group == VectorGroup::Yy0) return f.u_phase;
  std::array<double, 3> u{};
  for (std::size_t k = 0; k < 3; ++k) u[k] = f.u_line[k] / std::numbers::sqrt3;
  return u;
}

// Full three-phase pipeline: refer LV samples through the winding ratio, run
// one reconstruction per winding, compose the MV frame.
class ThreePhaseTwin {
 public:
  ThreePhaseTwin(const TransformerParams& params, double fs)
      : params_(params),
        fs_(fs),
        ph_{SinglePhaseTwin(twin_coeffs(params), fs), SinglePhaseTwin(twin_coeffs(params), fs),
            SinglePhaseTwin(twin_coeffs(params), fs)} {
    params_.validate();
  }

  struct Output {
    MvFrame frame;
    std::array<double, 3> u_winding{};
    std::array<double, 3> i_winding{};
    std::array<double, 3> u_phase_est{};
    bool warmup = false;
  };

  Output step(const std::array<double, 3>& u_lv, const std::array<double, 3>& i_lv,
              double r_scale = 1.0) {
    const double a = params_.winding_ratio();
    Output out;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto ref = refer_to_mv(u_lv[k], i_lv[k], a);
      const auto r = ph_[k].step(ref.u, ref.i, r_scale);
      out.u_winding[k] = r.u2;
      out.i_winding[k] = r.i2;
      out.warmup = out.warmup || r.warmup;
    }
    out.frame = compose_three_phase(out.u_winding, out.i_winding, params_.vector_group);
    out.u_phase_est = phase_voltage_estimates(out.frame, params_.vector_group);
    return out;
  }

  // Applied atomically between samples; recursion history carries over.
  void set_tap(double tap) {
    params_ = params_.with_tap(tap);
    const auto c = twin_coeffs(params_);
    for (auto& p : ph_) p.set_coeffs(c);
  }

  const TransformerParams& params() const { return params_; }

 private:
  TransformerParams params_;
  double fs_;
  std::array<SinglePhaseTwin, 3> ph_;
};

enum class FaultType { None, LG, LL, LLG };
enum class FaultSide { MV, LV };
enum class Observability { FullyObservable, PhaseVoltagesUnobservable };

inline const char* to_string(FaultType t) {
  switch (t) {
    case FaultType::None: return "none";
    case FaultType::LG: return "lg";
    case FaultType::LL: return "ll";
    case FaultType::LLG: return "llg";
  }
  return "?";
}

inline const char* to_string(Observability o) {
  return o == Observability::FullyObservable ? "FullyObservable" : "PhaseVoltagesUnobservable";
}

struct FaultContext {
  FaultType fault_type = FaultType::None;
  FaultSide fault_side = FaultSide::MV;
  VectorGroup tf_vector_group = VectorGroup::Dy11;
  bool tf_mv_grounded = false;
  bool tf_lv_grounded = false;
  bool substation_mv_grounded = false;

  void validate() const {
    if (mv_is_delta(tf_vector_group) && tf_mv_grounded)
      throw ConfigError("a delta MV winding has no neutral to ground");
  }
};

// Whether the reconstructed phase-to-neutral voltages can track the real ones
// during the fault. Ground involvement only becomes visible to the LV-side
// measurements when a zero-sequence current path exists through the
// transformer, which needs both wye neutrals tied down. Faults on the LV bus
// sit inside the measurement loop and corrupt every estimate.
inline Observability classify_fault_observability(const FaultContext& ctx) {
  ctx.validate();
  if (ctx.fault_type == FaultType::None) return Observability::FullyObservable;
  if (ctx.fault_side == FaultSide::LV) return Observability::PhaseVoltagesUnobservable;
  const bool ground_involved = ctx.fault_type == FaultType::LG || ctx.fault_type == FaultType::LLG;
  if (!ground_involved || !ctx.substation_mv_grounded) return Observability::FullyObservable;
  if (mv_is_delta(ctx.tf_vector_group)) return Observability::PhaseVoltagesUnobservable;
  const int grounded_sides = (ctx.tf_mv_grounded ? 1 : 0) + (ctx.tf_lv_grounded ? 1 : 0);
  return grounded_sides <= 1 ? Observability::PhaseVoltagesUnobservable
                             : Observability::FullyObservable;
}

}  // namespace mvtwin
