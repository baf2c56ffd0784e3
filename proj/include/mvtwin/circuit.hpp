#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/LU>

#include "mvtwin/errors.hpp"

namespace mvtwin {

struct TopologyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using NodeId = int;  // 0 is the ground reference
using ElementId = int;

// One spectral component of a source EMF: e(t) = Re(amp * exp(j*omega*t)).
// Keeping sources as tone lists (rather than opaque callables) lets the
// engine compute the exact periodic steady state for initialisation.
struct SourceTone {
  double omega = 0.0;
  std::complex<double> amp;
};

struct SimOptions {
  double dt = 1e-6;
  double duration = 0.4;
  // Seed every element's history with the periodic steady state of the
  // discretised network so records start transient-free.
  bool init_steady_state = true;
  // Verify the nodal current balance after every solve (test builds).
  bool check_kcl = false;
};

struct SimResult {
  double dt = 0.0;
  std::size_t steps = 0;
  std::vector<std::vector<double>> node_v;   // one trace per requested node
  std::vector<std::vector<double>> branch_i; // one trace per requested element
  double max_kcl_residual = 0.0;             // relative to largest branch current
};

// Fixed-step nodal simulator, trapezoidal companion models, dense LU
// refactored only when the topology changes (switch events, ratio steps).
class Circuit {
 public:
  NodeId add_node() { return ++last_node_; }

  ElementId add_series_rl(NodeId a, NodeId b, double r, double l) {
    check_nodes(a, b);
    if (r < 0.0 || l < 0.0 || (r == 0.0 && l == 0.0))
      throw ConfigError("series branch needs r >= 0, l >= 0, not both zero");
    Rl e;
    e.a = a;
    e.b = b;
    e.r = r;
    e.l = l;
    rl_.push_back(e);
    order_.push_back({Kind::Rl, static_cast<int>(rl_.size()) - 1});
    return static_cast<ElementId>(order_.size()) - 1;
  }
  ElementId add_resistor(NodeId a, NodeId b, double r) { return add_series_rl(a, b, r, 0.0); }
  ElementId add_inductor(NodeId a, NodeId b, double l) { return add_series_rl(a, b, 0.0, l); }

  ElementId add_voltage_source(NodeId a, NodeId b, std::vector<SourceTone> tones) {
    check_nodes(a, b);
    Src s;
    s.a = a;
    s.b = b;
    s.tones = std::move(tones);
    src_.push_back(s);
    order_.push_back({Kind::Src, static_cast<int>(src_.size()) - 1});
    return static_cast<ElementId>(order_.size()) - 1;
  }

  // v(s_hi) - v(s_lo) = ratio * (v(p_hi) - v(p_lo)); lossless coupling.
  ElementId add_ideal_transformer(NodeId p_hi, NodeId p_lo, NodeId s_hi, NodeId s_lo,
                                  double ratio) {
    check_nodes(p_hi, p_lo);
    check_nodes(s_hi, s_lo);
    if (!(ratio > 0.0)) throw ConfigError("transformer ratio must be positive");
    Tf t;
    t.p_hi = p_hi;
    t.p_lo = p_lo;
    t.s_hi = s_hi;
    t.s_lo = s_lo;
    t.ratio = ratio;
    tf_.push_back(t);
    order_.push_back({Kind::Tf, static_cast<int>(tf_.size()) - 1});
    return static_cast<ElementId>(order_.size()) - 1;
  }

  // Switches are series R-L branches that stamp nothing while open. A closed
  // switch opens only at a zero crossing of its own current, mirroring
  // breaker practice and keeping inductor currents continuous.
  ElementId add_switch(NodeId a, NodeId b, double r, double l, bool initially_closed) {
    const double floor_ohm = 1e-3;  // ideal shorts would need node merging
    ElementId id = add_series_rl(a, b, std::max(r, floor_ohm), l);
    Rl& e = rl_[order_[static_cast<std::size_t>(id)].second];
    e.is_switch = true;
    e.closed = initially_closed;
    return id;
  }

  void schedule_close(ElementId sw, double t) { switch_ref(sw).close_at = t; }
  void schedule_open_after(ElementId sw, double t) { switch_ref(sw).open_after = t; }
  void schedule_ratio(ElementId tf, double t, double ratio) {
    auto& [kind, idx] = order_.at(static_cast<std::size_t>(tf));
    if (kind != Kind::Tf) throw ConfigError("ratio schedule target is not a transformer");
    tf_[idx].sched.push_back({t, ratio});
    std::sort(tf_[idx].sched.begin(), tf_[idx].sched.end());
  }

  int node_count() const { return last_node_; }

  SimResult run(const SimOptions& opt, const std::vector<NodeId>& v_probes,
                const std::vector<ElementId>& i_probes) {
    if (!(opt.dt > 0.0) || opt.dt > 2e-6 + 1e-12)
      throw ConfigError("internal step must satisfy 0 < dt <= 2e-6 s");
    if (!(opt.duration > 0.0)) throw ConfigError("duration must be positive");
    for (NodeId n : v_probes) check_probe_node(n);
    for (ElementId e : i_probes) order_.at(static_cast<std::size_t>(e));

    dt_ = opt.dt;
    const auto steps = static_cast<std::size_t>(std::llround(opt.duration / opt.dt)) + 1;
    SimResult res;
    res.dt = opt.dt;
    res.steps = steps;
    res.node_v.assign(v_probes.size(), std::vector<double>(steps, 0.0));
    res.branch_i.assign(i_probes.size(), std::vector<double>(steps, 0.0));

    assign_extra_vars();
    rebuild();

    if (opt.init_steady_state)
      init_periodic_steady_state();
    else
      solve_step(0.0);
    commit_histories();
    record(res, 0, v_probes, i_probes);

    for (std::size_t n = 1; n < steps; ++n) {
      const double t = static_cast<double>(n) * opt.dt;
      if (apply_events(t)) rebuild();
      solve_step(t);
      if (opt.check_kcl) res.max_kcl_residual = std::max(res.max_kcl_residual, kcl_residual());
      record(res, n, v_probes, i_probes);
      arm_zero_cross_openings(t);
      commit_histories();
    }
    return res;
  }

 private:
  enum class Kind { Rl, Src, Tf };

  struct Rl {
    NodeId a = 0, b = 0;
    double r = 0.0, l = 0.0;
    bool is_switch = false;
    bool closed = true;
    double close_at = std::numeric_limits<double>::infinity();
    double open_after = std::numeric_limits<double>::infinity();
    bool open_armed = false;
    bool open_pending = false;
    // companion: i = g*(v_a - v_b) + hist, hist = g*v_prev + hcoef*i_prev
    double g = 0.0, hcoef = 0.0;
    double i_prev = 0.0, v_prev = 0.0;
    double i_now = 0.0, v_now = 0.0;
  };
  struct Src {
    NodeId a = 0, b = 0;
    std::vector<SourceTone> tones;
    int xv = -1;
    double i_now = 0.0;  // current a -> b through the source
    double e(double t) const {
      double v = 0.0;
      for (const auto& tn : tones)
        v += std::real(tn.amp * std::exp(std::complex<double>(0.0, tn.omega * t)));
      return v;
    }
  };
  struct Tf {
    NodeId p_hi = 0, p_lo = 0, s_hi = 0, s_lo = 0;
    double ratio = 1.0;
    std::vector<std::pair<double, double>> sched;
    std::size_t sched_pos = 0;
    int xv = -1;
    double i_now = 0.0;  // current drawn into the secondary hi terminal
  };

  void check_nodes(NodeId a, NodeId b) const {
    if (a < 0 || a > last_node_ || b < 0 || b > last_node_)
      throw ConfigError("element references an unknown node");
    if (a == b) throw ConfigError("element terminals must differ");
  }
  void check_probe_node(NodeId n) const {
    if (n < 0 || n > last_node_) throw ConfigError("probe references an unknown node");
  }
  Rl& switch_ref(ElementId id) {
    auto& [kind, idx] = order_.at(static_cast<std::size_t>(id));
    if (kind != Kind::Rl || !rl_[idx].is_switch) throw ConfigError("element is not a switch");
    return rl_[idx];
  }

  void assign_extra_vars() {
    int next = last_node_;  // node k lives at row k-1, extras follow
    for (auto& s : src_) s.xv = next++;
    for (auto& t : tf_) t.xv = next++;
    n_unknowns_ = next;
  }

  void rebuild() {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_unknowns_, n_unknowns_);
    auto idx = [](NodeId n) { return n - 1; };
    auto stamp = [&](NodeId a, NodeId b, int col, double val) {
      // generic column add guarded for ground
      if (a > 0) A(idx(a), col) += val;
      if (b > 0) A(idx(b), col) -= val;
    };
    for (auto& e : rl_) {
      if (!e.closed) {
        e.g = 0.0;
        e.hcoef = 0.0;
        continue;
      }
      const double two_l_dt = 2.0 * e.l / dt_;
      e.g = 1.0 / (e.r + two_l_dt);
      e.hcoef = (e.l == 0.0) ? -1.0 : (two_l_dt - e.r) * e.g;
      // conductance stamps; for l == 0 the history cancels exactly
      if (e.a > 0) A(idx(e.a), idx(e.a)) += e.g;
      if (e.b > 0) A(idx(e.b), idx(e.b)) += e.g;
      if (e.a > 0 && e.b > 0) {
        A(idx(e.a), idx(e.b)) -= e.g;
        A(idx(e.b), idx(e.a)) -= e.g;
      }
    }
    for (const auto& s : src_) {
      stamp(s.a, s.b, s.xv, 1.0);
      if (s.a > 0) A(s.xv, idx(s.a)) += 1.0;
      if (s.b > 0) A(s.xv, idx(s.b)) -= 1.0;
    }
    for (const auto& t : tf_) {
      stamp(t.s_hi, t.s_lo, t.xv, 1.0);
      stamp(t.p_hi, t.p_lo, t.xv, -t.ratio);
      if (t.s_hi > 0) A(t.xv, idx(t.s_hi)) += 1.0;
      if (t.s_lo > 0) A(t.xv, idx(t.s_lo)) -= 1.0;
      if (t.p_hi > 0) A(t.xv, idx(t.p_hi)) -= t.ratio;
      if (t.p_lo > 0) A(t.xv, idx(t.p_lo)) += t.ratio;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> rank_check(A);
    if (!rank_check.isInvertible())
      throw TopologyError("singular nodal system: floating subnetwork or short loop");
    lu_.compute(A);
  }

  void solve_step(double t) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_unknowns_);
    auto idx = [](NodeId n) { return n - 1; };
    for (const auto& e : rl_) {
      if (e.g == 0.0 && !e.closed) continue;
      const double hist = (e.l == 0.0) ? 0.0 : e.g * e.v_prev + e.hcoef * e.i_prev;
      if (e.a > 0) rhs(idx(e.a)) -= hist;
      if (e.b > 0) rhs(idx(e.b)) += hist;
    }
    for (const auto& s : src_) rhs(s.xv) = s.e(t);
    x_ = lu_.solve(rhs);
    auto v_of = [&](NodeId n) { return n > 0 ? x_(idx(n)) : 0.0; };
    for (auto& e : rl_) {
      if (!e.closed) {
        e.v_now = v_of(e.a) - v_of(e.b);
        e.i_now = 0.0;
        continue;
      }
      e.v_now = v_of(e.a) - v_of(e.b);
      const double hist = (e.l == 0.0) ? 0.0 : e.g * e.v_prev + e.hcoef * e.i_prev;
      e.i_now = e.g * e.v_now + hist;
    }
    for (auto& s : src_) s.i_now = x_(s.xv);
    for (auto& t : tf_) t.i_now = x_(t.xv);
  }

  // Exact periodic steady state of the discretised network: every companion
  // recursion is evaluated in phasor form with z = exp(j*omega*dt), one solve
  // per distinct source frequency, superposed.
  void init_periodic_steady_state() {
    std::vector<double> omegas;
    for (const auto& s : src_)
      for (const auto& tn : s.tones) {
        bool seen = false;
        for (double w : omegas)
          if (std::abs(w - tn.omega) < 1e-9) seen = true;
        if (!seen) omegas.push_back(tn.omega);
      }
    for (auto& e : rl_) {
      e.i_prev = e.v_prev = e.i_now = e.v_now = 0.0;
    }
    for (auto& s : src_) s.i_now = 0.0;
    for (auto& t : tf_) t.i_now = 0.0;
    node_v0_.assign(static_cast<std::size_t>(last_node_) + 1, 0.0);

    using cd = std::complex<double>;
    auto idx = [](NodeId n) { return n - 1; };
    for (double w : omegas) {
      const cd z_inv = std::exp(cd(0.0, -w * dt_));
      Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n_unknowns_, n_unknowns_);
      std::vector<cd> y(rl_.size(), cd(0.0, 0.0));
      for (std::size_t k = 0; k < rl_.size(); ++k) {
        auto& e = rl_[k];
        if (!e.closed) continue;
        const double two_l_dt = 2.0 * e.l / dt_;
        const double g = 1.0 / (e.r + two_l_dt);
        const double hc = (two_l_dt - e.r) * g;
        const cd den = 1.0 - hc * z_inv;
        if (std::abs(den) < 1e-14)
          throw TopologyError("zero-frequency source across a pure inductor");
        y[k] = (e.l == 0.0) ? cd(1.0 / e.r, 0.0) : g * (1.0 + z_inv) / den;
        if (e.a > 0) A(idx(e.a), idx(e.a)) += y[k];
        if (e.b > 0) A(idx(e.b), idx(e.b)) += y[k];
        if (e.a > 0 && e.b > 0) {
          A(idx(e.a), idx(e.b)) -= y[k];
          A(idx(e.b), idx(e.a)) -= y[k];
        }
      }
      for (const auto& s : src_) {
        if (s.a > 0) A(idx(s.a), s.xv) += 1.0;
        if (s.b > 0) A(idx(s.b), s.xv) -= 1.0;
        if (s.a > 0) A(s.xv, idx(s.a)) += 1.0;
        if (s.b > 0) A(s.xv, idx(s.b)) -= 1.0;
      }
      for (const auto& t : tf_) {
        if (t.s_hi > 0) A(idx(t.s_hi), t.xv) += 1.0;
        if (t.s_lo > 0) A(idx(t.s_lo), t.xv) -= 1.0;
        if (t.p_hi > 0) A(idx(t.p_hi), t.xv) -= t.ratio;
        if (t.p_lo > 0) A(idx(t.p_lo), t.xv) += t.ratio;
        if (t.s_hi > 0) A(t.xv, idx(t.s_hi)) += 1.0;
        if (t.s_lo > 0) A(t.xv, idx(t.s_lo)) -= 1.0;
        if (t.p_hi > 0) A(t.xv, idx(t.p_hi)) -= t.ratio;
        if (t.p_lo > 0) A(t.xv, idx(t.p_lo)) += t.ratio;
      }
      Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n_unknowns_);
      for (const auto& s : src_) {
        cd amp(0.0, 0.0);
        for (const auto& tn : s.tones)
          if (std::abs(tn.omega - w) < 1e-9) amp += tn.amp;
        rhs(s.xv) = amp;
      }
      Eigen::FullPivLU<Eigen::MatrixXcd> lu(A);
      if (!lu.isInvertible())
        throw TopologyError("singular steady-state system: floating subnetwork");
      Eigen::VectorXcd xc = lu.solve(rhs);
      auto v_of = [&](NodeId n) { return n > 0 ? xc(idx(n)) : cd(0.0, 0.0); };
      for (std::size_t k = 0; k < rl_.size(); ++k) {
        auto& e = rl_[k];
        if (!e.closed) continue;
        const cd v = v_of(e.a) - v_of(e.b);
        const cd i = y[k] * v;
        e.v_prev += std::real(v);
        e.i_prev += std::real(i);
      }
      for (auto& s : src_) s.i_now += std::real(xc(s.xv));
      for (auto& t : tf_) t.i_now += std::real(xc(t.xv));
      for (NodeId n = 1; n <= last_node_; ++n)
        node_v0_[static_cast<std::size_t>(n)] += std::real(xc(idx(n)));
    }
    for (auto& e : rl_) {
      e.v_now = e.v_prev;
      e.i_now = e.i_prev;
    }
    init_recorded_ = true;
  }

  bool apply_events(double t) {
    bool changed = false;
    for (auto& e : rl_) {
      if (!e.is_switch) continue;
      if (!e.closed && e.close_at <= t) {
        e.closed = true;
        e.close_at = std::numeric_limits<double>::infinity();
        e.i_prev = 0.0;
        e.v_prev = 0.0;
        changed = true;
      }
      if (e.closed && !e.open_armed && e.open_after <= t) e.open_armed = true;
      if (e.open_pending) {
        e.closed = false;
        e.open_pending = false;
        e.open_armed = false;
        e.i_prev = 0.0;
        e.v_prev = 0.0;
        changed = true;
      }
    }
    for (auto& tf : tf_) {
      while (tf.sched_pos < tf.sched.size() && tf.sched[tf.sched_pos].first <= t) {
        tf.ratio = tf.sched[tf.sched_pos].second;
        ++tf.sched_pos;
        changed = true;
      }
    }
    return changed;
  }

  void arm_zero_cross_openings(double) {
    for (auto& e : rl_) {
      if (!e.is_switch || !e.open_armed || !e.closed) continue;
      if (e.i_prev * e.i_now <= 0.0 && (e.i_prev != 0.0 || e.i_now != 0.0)) e.open_pending = true;
    }
  }

  void commit_histories() {
    for (auto& e : rl_) {
      e.i_prev = e.i_now;
      e.v_prev = e.v_now;
    }
  }

  double kcl_residual() {
    std::vector<double> sum(static_cast<std::size_t>(last_node_) + 1, 0.0);
    double i_max = 0.0;
    auto flow = [&](NodeId a, NodeId b, double i) {
      if (a > 0) sum[static_cast<std::size_t>(a)] += i;
      if (b > 0) sum[static_cast<std::size_t>(b)] -= i;
      i_max = std::max(i_max, std::abs(i));
    };
    for (const auto& e : rl_)
      if (e.closed) flow(e.a, e.b, e.i_now);
    for (const auto& s : src_) flow(s.a, s.b, s.i_now);
    for (const auto& t : tf_) {
      flow(t.s_hi, t.s_lo, t.i_now);
      flow(t.p_hi, t.p_lo, -t.ratio * t.i_now);
    }
    double worst = 0.0;
    for (NodeId n = 1; n <= last_node_; ++n)
      worst = std::max(worst, std::abs(sum[static_cast<std::size_t>(n)]));
    return i_max > 0.0 ? worst / i_max : 0.0;
  }

  void record(SimResult& res, std::size_t n, const std::vector<NodeId>& v_probes,
              const std::vector<ElementId>& i_probes) {
    auto idx = [](NodeId nd) { return nd - 1; };
    for (std::size_t k = 0; k < v_probes.size(); ++k) {
      const NodeId nd = v_probes[k];
      double v = 0.0;
      if (nd > 0)
        v = (n == 0 && init_recorded_) ? node_v0_[static_cast<std::size_t>(nd)] : x_(idx(nd));
      res.node_v[k][n] = v;
    }
    for (std::size_t k = 0; k < i_probes.size(); ++k) {
      const auto& [kind, j] = order_[static_cast<std::size_t>(i_probes[k])];
      double i = 0.0;
      switch (kind) {
        case Kind::Rl: i = rl_[j].i_now; break;
        case Kind::Src: i = src_[j].i_now; break;
        case Kind::Tf: i = tf_[j].i_now; break;
      }
      res.branch_i[k][n] = i;
    }
    if (n == 0) init_recorded_ = false;
  }

  NodeId last_node_ = 0;
  int n_unknowns_ = 0;
  double dt_ = 1e-6;
  std::vector<Rl> rl_;
  std::vector<Src> src_;
  std::vector<Tf> tf_;
  std::vector<std::pair<Kind, int>> order_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  Eigen::VectorXd x_;
  std::vector<double> node_v0_;
  bool init_recorded_ = false;
};

}  // namespace mvtwin
