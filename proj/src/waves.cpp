#include "scw/waves.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "scw/numerics.hpp"
#include "scw/potential.hpp"

namespace scw {

namespace {

struct PcData {
  std::vector<double> pos;  // ascending jump targets in (0,1)
  std::vector<double> h;    // heights, sum 1
};

PcData pc_of(const ExitFunction& f) {
  if (!f.is_piecewise_constant())
    throw Error("BadInput", "wave solvers need piecewise-constant exit functions");
  return {f.jump_positions(), f.jump_heights()};
}

// merge jumps closer than tol; total mass is preserved
PcData collapse(const PcData& p, double tol = 1e-9) {
  PcData q;
  for (size_t i = 0; i < p.pos.size(); ++i) {
    if (!q.pos.empty() && p.pos[i] <= q.pos.back() + tol) {
      double m = q.h.back() + p.h[i];
      q.pos.back() = (q.pos.back() * q.h.back() + p.pos[i] * p.h[i]) / m;
      q.h.back() = m;
    } else {
      q.pos.push_back(p.pos[i]);
      q.h.push_back(p.h[i]);
    }
  }
  return q;
}

// h(x) -> 1 - h(1-x); negates the area gap without swapping roles
PcData flip_pc(const PcData& p) {
  PcData q;
  q.pos.assign(p.pos.rbegin(), p.pos.rend());
  for (double& x : q.pos) x = 1.0 - x;
  q.h.assign(p.h.rbegin(), p.h.rend());
  return q;
}

double mass_mean(const PcData& p) {
  double s = 0;
  for (size_t i = 0; i < p.pos.size(); ++i) s += p.h[i] * p.pos[i];
  return s;
}

ExitFunction pc_fn(PcData p) {
  for (double& x : p.pos) x = std::min(1.0 - 1e-12, std::max(1e-12, x));
  PcData q = collapse(p, 1e-12);
  return ExitFunction::piecewise_constant(q.pos, q.h);
}

double smooth_at(const std::vector<double>& z, const std::vector<double>& h, const KernelSpec& k,
                 double x) {
  double s = 0;
  for (size_t i = 0; i < z.size(); ++i) s += h[i] * k.cdf(x - z[i]);
  return s;
}

// root of sum_i h_i Omega(x - z_i) = target; the profile saturates at 0/1
// within W of the extreme jumps, so this bracket always straddles
double solve_smooth(const std::vector<double>& z, const std::vector<double>& h,
                    const KernelSpec& k, double target) {
  double lo = *std::min_element(z.begin(), z.end()) - k.W() - 1.0;
  double hi = *std::max_element(z.begin(), z.end()) + k.W() + 1.0;
  return bisect_root([&](double x) { return smooth_at(z, h, k, x) - target; }, lo, hi, 1e-14);
}

// --------------------------------------------------------------------------
// continuation state; vector layout z = [zg ; zf], heights delta = [dg ; df]

struct ContinuationRun {
  KernelSpec kern;
  std::vector<double> dg, df;
  Eigen::VectorXd z;
  double alpha = 0;
  int rk_order = 5;
  double max_cond = 0;
  int stages = 0;

  int Kg() const { return (int)dg.size(); }
  int Kf() const { return (int)df.size(); }
  int n() const { return Kg() + Kf(); }

  Eigen::VectorXd delta() const {
    Eigen::VectorXd d(n());
    for (int i = 0; i < Kg(); ++i) d(i) = dg[i];
    for (int j = 0; j < Kf(); ++j) d(Kg() + j) = df[j];
    return d;
  }

  Eigen::VectorXd eval_u(const Eigen::VectorXd& zz, double a) const {
    Eigen::VectorXd u(n());
    for (int i = 0; i < Kg(); ++i) {
      double s = 0;
      for (int j = 0; j < Kf(); ++j) s += df[j] * kern.cdf(zz(i) - zz(Kg() + j));
      u(i) = s;
    }
    for (int j = 0; j < Kf(); ++j) {
      double s = 0;
      for (int i = 0; i < Kg(); ++i) s += dg[i] * kern.cdf(zz(Kg() + j) + a - zz(i));
      u(Kg() + j) = s;
    }
    return u;
  }

  // Jacobian of u in z; diagonal entries equal the row sums of the off-diagonal
  // magnitudes, which keeps the normalized coupling matrix exactly stochastic
  Eigen::MatrixXd jac(const Eigen::VectorXd& zz, double a) const {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n(), n());
    for (int i = 0; i < Kg(); ++i) {
      double d = 0;
      for (int j = 0; j < Kf(); ++j) {
        double w = kern.omega(zz(i) - zz(Kg() + j)) * df[j];
        H(i, Kg() + j) = -w;
        d += w;
      }
      H(i, i) = d;
    }
    for (int j = 0; j < Kf(); ++j) {
      double d = 0;
      for (int i = 0; i < Kg(); ++i) {
        double w = kern.omega(zz(Kg() + j) + a - zz(i)) * dg[i];
        H(Kg() + j, i) = -w;
        d += w;
      }
      H(Kg() + j, Kg() + j) = d;
    }
    return H;
  }
};

Eigen::MatrixXd stochastic_of(const Eigen::MatrixXd& H) {
  int n = (int)H.rows();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double d = H(i, i);
    if (!(d > 1e-280)) throw Error("StepCollapse", "smoothed profile slope vanished at a jump");
    for (int j = 0; j < n; ++j)
      if (j != i) M(i, j) = -H(i, j) / d;
  }
  return M;
}

double cond_estimate(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
  Eigen::VectorXd rd = qr.matrixQR().diagonal().cwiseAbs();
  double mn = rd.minCoeff();
  if (!(mn > 0)) return std::numeric_limits<double>::infinity();
  return rd.maxCoeff() / mn;
}

// spectral radius of M with the pinned (last) row and column zeroed
double rho_pinned(const Eigen::MatrixXd& M) {
  int n = (int)M.rows();
  Eigen::MatrixXd P = M;
  P.row(n - 1).setZero();
  P.col(n - 1).setZero();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  v(n - 1) = 0;
  if (v.norm() < 1e-300) return 0.0;
  double r = 0;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd w = P * v;
    double nw = w.norm();
    if (nw < 1e-300) return 0.0;
    r = nw / v.norm();
    v = w / nw;
  }
  return r;
}

struct RkStep {
  Eigen::VectorXd z;
  double err;
};

// Fehlberg 4(5); rk_order picks which embedded solution is propagated
RkStep rk45(const std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>& f,
            const Eigen::VectorXd& z, double t, double dt, int rk_order) {
  const Eigen::VectorXd k1 = f(z, t);
  const Eigen::VectorXd k2 = f(z + dt * (k1 / 4.0), t + dt / 4.0);
  const Eigen::VectorXd k3 = f(z + dt * (3.0 / 32 * k1 + 9.0 / 32 * k2), t + 3.0 * dt / 8);
  const Eigen::VectorXd k4 =
      f(z + dt * (1932.0 / 2197 * k1 - 7200.0 / 2197 * k2 + 7296.0 / 2197 * k3),
        t + 12.0 * dt / 13);
  const Eigen::VectorXd k5 =
      f(z + dt * (439.0 / 216 * k1 - 8.0 * k2 + 3680.0 / 513 * k3 - 845.0 / 4104 * k4), t + dt);
  const Eigen::VectorXd k6 = f(z + dt * (-8.0 / 27 * k1 + 2.0 * k2 - 3544.0 / 2565 * k3 +
                                         1859.0 / 4104 * k4 - 11.0 / 40 * k5),
                               t + dt / 2);
  Eigen::VectorXd z4 =
      z + dt * (25.0 / 216 * k1 + 1408.0 / 2565 * k3 + 2197.0 / 4104 * k4 - 1.0 / 5 * k5);
  Eigen::VectorXd z5 = z + dt * (16.0 / 135 * k1 + 6656.0 / 12825 * k3 + 28561.0 / 56430 * k4 -
                                 9.0 / 50 * k5 + 2.0 / 55 * k6);
  RkStep out;
  out.err = (z5 - z4).lpNorm<Eigen::Infinity>();
  out.z = (rk_order == 4) ? z4 : z5;
  return out;
}

bool ascending(const Eigen::VectorXd& z, int lo, int hi) {
  for (int i = lo + 1; i < hi; ++i)
    if (z(i) < z(i - 1) - 1e-9) return false;
  return true;
}

// damped Newton on the full system; the rank-one gauge term makes the
// Jacobian invertible and conserves delta'z along the iteration
bool newton_full(ContinuationRun& run, const Eigen::VectorXd& target, double a, double tol) {
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd F = run.eval_u(run.z, a) - target;
    double r = F.lpNorm<Eigen::Infinity>();
    if (r < tol) return true;
    Eigen::MatrixXd J = run.jac(run.z, a);
    J += Eigen::VectorXd::Ones(run.n()) * run.delta().transpose();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
    run.max_cond = std::max(run.max_cond, cond_estimate(qr));
    Eigen::VectorXd dz = qr.solve(-F);
    if (!dz.allFinite()) return false;
    double lam = 1.0;
    bool moved = false;
    for (int half = 0; half < 12 && !moved; ++half, lam /= 2) {
      Eigen::VectorXd zt = run.z + lam * dz;
      if ((run.eval_u(zt, a) - target).lpNorm<Eigen::Infinity>() < r) {
        run.z = zt;
        moved = true;
      }
    }
    if (!moved) return r < 1e-10;
  }
  return (run.eval_u(run.z, a) - target).lpNorm<Eigen::Infinity>() < 1e-10;
}

// Newton with the top (last) coordinate frozen; used while the shift advances
bool newton_reduced(ContinuationRun& run, const Eigen::VectorXd& target, double a, double tol) {
  const int n = run.n();
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd F = run.eval_u(run.z, a) - target;
    F(n - 1) = 0;
    double r = F.lpNorm<Eigen::Infinity>();
    if (r < tol) return true;
    Eigen::MatrixXd Jr = run.jac(run.z, a).topLeftCorner(n - 1, n - 1);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Jr);
    run.max_cond = std::max(run.max_cond, cond_estimate(qr));
    Eigen::VectorXd dzr = qr.solve(-F.head(n - 1));
    if (!dzr.allFinite()) return false;
    double lam = 1.0;
    bool moved = false;
    for (int half = 0; half < 12 && !moved; ++half, lam /= 2) {
      Eigen::VectorXd zt = run.z;
      zt.head(n - 1) += lam * dzr;
      Eigen::VectorXd Ft = run.eval_u(zt, a) - target;
      Ft(n - 1) = 0;
      if (Ft.lpNorm<Eigen::Infinity>() < r) {
        run.z = zt;
        moved = true;
      }
    }
    if (!moved) return r < 1e-10;
  }
  Eigen::VectorXd F = run.eval_u(run.z, a) - target;
  F(n - 1) = 0;
  return F.lpNorm<Eigen::Infinity>() < 1e-10;
}

void check_strict_gap(const PcData& f, const PcData& g, const char* where) {
  try {
    auto rep = gap_verdict(pc_fn(f), pc_fn(g));
    if (rep.verdict != GapVerdict::StrictGap)
      throw Error("GapViolated", std::string("strict gap lost: ") + where + " (A=" +
                                     std::to_string(rep.A) + ", worst interior phi=" +
                                     std::to_string(rep.witness.phi) + ")");
  } catch (const Error& e) {
    // no interior crossing at all: the gap holds trivially
    if (e.code != "NoNontrivialCrossing") throw;
  }
}

void structural_checks(ContinuationRun& run, double a, const char* where) {
  Eigen::MatrixXd M;
  try {
    M = stochastic_of(run.jac(run.z, a));
  } catch (const Error& e) {
    throw Error(e.code, std::string(e.what()) + ": " + where);
  }
  if (rho_pinned(M) > 1.0 + 1e-9)
    throw Error("GapViolated", std::string("pinned coupling matrix not contracting: ") + where);
  if (!ascending(run.z, 0, run.Kg()) || !ascending(run.z, run.Kg(), run.n()))
    throw Error("GapViolated", std::string("jump ordering lost: ") + where);
}

// deformation stage: straight-line path in target space from the balanced
// two-step pair to (clamped f targets, g targets); the shift stays zero
void run_stage_one(ContinuationRun& run, const std::vector<double>& ug_t,
                   const std::vector<double>& uf_t, int steps) {
  const int Kg = run.Kg(), Kf = run.Kf(), n = run.n();
  const double Bg = std::inner_product(ug_t.begin(), ug_t.end(), run.dg.begin(), 0.0);
  const double Bf = std::inner_product(uf_t.begin(), uf_t.end(), run.df.begin(), 0.0);

  // start: all f jumps at 0, all g jumps at the Bg-quantile of the kernel
  double y = bisect_root([&](double x) { return run.kern.cdf(x) - Bg; }, -run.kern.W() - 1.0,
                         run.kern.W() + 1.0, 1e-14);
  run.z = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < Kg; ++i) run.z(i) = y;
  run.z.array() -= run.delta().dot(run.z) / 2.0;

  Eigen::VectorXd base(n), udot(n);
  for (int i = 0; i < Kg; ++i) {
    base(i) = Bg;
    udot(i) = ug_t[i] - Bg;
  }
  for (int j = 0; j < Kf; ++j) {
    base(Kg + j) = Bf;
    udot(Kg + j) = uf_t[j] - Bf;
  }

  auto field = [&](const Eigen::VectorXd& zz, double) -> Eigen::VectorXd {
    Eigen::MatrixXd J = run.jac(zz, 0.0);
    J += Eigen::VectorXd::Ones(n) * run.delta().transpose();
    return Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(J).solve(udot);
  };

  double t = 0, dt = 1.0 / steps;
  long accepted = 0;
  while (t < 1.0 - 1e-15) {
    if (dt < 1e-12) throw Error("StepCollapse", "deformation stage stalled");
    double h = std::min(dt, 1.0 - t);
    RkStep rk = rk45(field, run.z, t, h, run.rk_order);
    if (!rk.z.allFinite() || rk.err > 1e-8 * (1.0 + run.z.lpNorm<Eigen::Infinity>())) {
      dt /= 2;
      continue;
    }
    Eigen::VectorXd zsave = run.z;
    double cond_save = run.max_cond;
    run.z = rk.z;
    Eigen::VectorXd target = base + (t + h) * udot;
    if (!newton_full(run, target, 0.0, 1e-13) || run.max_cond > 1e10) {
      run.z = zsave;
      run.max_cond = std::min(cond_save, 1e10);
      dt /= 2;
      continue;
    }
    structural_checks(run, 0.0, "deformation stage");
    if (std::abs(run.delta().dot(run.z)) > 1e-6)
      throw Error("StepCollapse", "translation gauge drifted");
    t += h;
    ++accepted;
    if (accepted % 4 == 0 || t >= 1.0 - 1e-15) {
      PcData fpath{std::vector<double>(target.data() + Kg, target.data() + n), run.df};
      PcData gpath{std::vector<double>(target.data(), target.data() + Kg), run.dg};
      check_strict_gap(fpath, gpath, "deformation stage");
    }
    dt = std::min(dt * 1.6, 4.0 / steps);
    if (accepted > 100000) throw Error("StepCollapse", "deformation stage did not terminate");
  }
  ++run.stages;
}

struct PeelPlan {
  std::vector<double> levels;  // distinct clamped-off f targets, ascending
  std::vector<double> masses;  // mass pinned when each level is reached
};

// shift stage: alpha advances at unit rate while every jump except the top f
// jump relaxes; whenever the top value reaches the next level, the mass of
// that level peels off into a pinned jump and the reduced system shrinks
void run_stage_two(ContinuationRun& run, const std::vector<double>& ug_t,
                   std::vector<double>& uf_t, const PeelPlan& plan, int steps) {
  for (size_t lev = 0; lev < plan.levels.size(); ++lev) {
    const int Kg = run.Kg(), n = run.n();
    const double w = plan.levels[lev];
    const bool last = lev + 1 == plan.levels.size();

    Eigen::VectorXd target(n);
    for (int i = 0; i < Kg; ++i) target(i) = ug_t[i];
    for (int j = 0; j + 1 < run.Kf(); ++j) target(Kg + j) = uf_t[j];
    target(n - 1) = w;  // only used by the final full polish

    auto field = [&](const Eigen::VectorXd& zz, double tau) -> Eigen::VectorXd {
      Eigen::MatrixXd M = stochastic_of(run.jac(zz, run.alpha + tau));
      M.row(n - 1).setZero();
      M.col(n - 1).setZero();
      Eigen::MatrixXd S = Eigen::MatrixXd::Identity(n, n) - M;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
      for (int j = Kg; j < n - 1; ++j) rhs(j) = 1.0;
      Eigen::VectorXd x = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(S).solve(rhs);
      x(n - 1) = 0.0;
      return -x;
    };

    auto top_value = [&](double a) {
      double s = 0;
      for (int i = 0; i < Kg; ++i) s += run.dg[i] * run.kern.cdf(run.z(n - 1) + a - run.z(i));
      return s;
    };

    double tau = 0, dt = 1.0 / steps;
    long accepted = 0;
    bool landed = false;
    while (!landed) {
      if (dt < 1e-14) throw Error("StepCollapse", "shift stage stalled");
      if (run.alpha + tau > 100.0) throw Error("StepCollapse", "shift ran away");
      RkStep rk;
      try {
        rk = rk45(field, run.z, tau, dt, run.rk_order);
      } catch (const Error& e) {
        // a trial stage wandered past the kernel support; shorten and retry
        if (e.code != "StepCollapse") throw;
        dt /= 2;
        continue;
      }
      if (!rk.z.allFinite() || rk.err > 1e-8 * (1.0 + run.z.lpNorm<Eigen::Infinity>())) {
        dt /= 2;
        continue;
      }
      Eigen::VectorXd zsave = run.z;
      double cond_save = run.max_cond;
      run.z = rk.z;
      if (!newton_reduced(run, target, run.alpha + tau + dt, 1e-13) || run.max_cond > 1e10) {
        run.z = zsave;
        run.max_cond = std::min(cond_save, 1e10);
        dt /= 2;
        continue;
      }
      structural_checks(run, run.alpha + tau + dt, "shift stage");
      double r = top_value(run.alpha + tau + dt);
      if (r < w - 1e-12) {
        tau += dt;
        ++accepted;
        if (accepted % 4 == 0) {
          PcData fpath{std::vector<double>(uf_t.begin(), uf_t.end() - 1), run.df};
          fpath.pos.push_back(r);
          PcData gpath{ug_t, run.dg};
          check_strict_gap(fpath, gpath, "shift stage");
        }
        dt = std::min(dt * 1.6, 0.5);
        if (accepted > 100000) throw Error("StepCollapse", "shift stage did not terminate");
        continue;
      }
      // overshot the level; bisect the step length to land on it
      double lo = 0.0, hi = dt, mid = dt;
      for (int it = 0; it < 80 && std::abs(r - w) > 1e-12 && hi - lo > 1e-18; ++it) {
        mid = (lo + hi) / 2;
        run.z = zsave;
        try {
          run.z = rk45(field, run.z, tau, mid, run.rk_order).z;
        } catch (const Error& e) {
          if (e.code != "StepCollapse") throw;
          hi = mid;
          run.z = zsave;
          continue;
        }
        if (!newton_reduced(run, target, run.alpha + tau + mid, 1e-13)) {
          hi = mid;
          run.z = zsave;
          continue;
        }
        r = top_value(run.alpha + tau + mid);
        (r < w ? lo : hi) = mid;
      }
      if (std::abs(r - w) > 1e-9) throw Error("StepCollapse", "could not land on a peel level");
      tau += mid;
      landed = true;
    }

    run.alpha += tau;
    ++run.stages;
    uf_t.back() = w;

    if (!last) {
      double m = plan.masses[lev];
      double rest = run.df.back() - m;
      run.df.back() = m;
      run.df.push_back(rest);
      uf_t.push_back(w);  // real target assigned when the next level lands
      Eigen::VectorXd z2(n + 1);
      z2.head(n) = run.z;
      z2(n) = run.z(n - 1);  // new top starts on the jump it peeled from
      run.z = z2;
    }
  }
}

// solves the (possibly clamped) system for one kernel; inputs already collapsed
// and oriented so the area gap is nonnegative
WaveSolution solve_oriented(const PcData& F, const PcData& G, const KernelSpec& kern, int steps,
                            int rk_order) {
  ContinuationRun run;
  run.kern = kern;
  run.dg = G.h;
  run.rk_order = rk_order;

  const double Bg = mass_mean(G);
  const double Bf = mass_mean(F);
  const double A = Bf + Bg - 1.0;

  // clamp f targets at r0 so the clamped pair balances: sum df min(uf, r0) = 1 - Bg
  double r0 = F.pos.back();
  bool shifted = A > 1e-13;
  if (shifted) {
    double want = 1.0 - Bg;
    auto clamped_mass = [&](double r) {
      double s = 0;
      for (size_t j = 0; j < F.pos.size(); ++j) s += F.h[j] * std::min(F.pos[j], r);
      return s;
    };
    r0 = bisect_root([&](double r) { return clamped_mass(r) - want; }, 0.0, F.pos.back(), 1e-15);
  }

  PcData clamped;
  PeelPlan plan;
  for (size_t j = 0; j < F.pos.size(); ++j) {
    if (F.pos[j] < r0 - 1e-9) {
      clamped.pos.push_back(F.pos[j]);
      clamped.h.push_back(F.h[j]);
    } else {
      plan.levels.push_back(F.pos[j]);
      plan.masses.push_back(F.h[j]);
    }
  }
  if (shifted) {
    double top_mass = std::accumulate(plan.masses.begin(), plan.masses.end(), 0.0);
    clamped.pos.push_back(r0);
    clamped.h.push_back(top_mass);
    if (plan.levels.size() == 1 && plan.levels[0] <= r0 + 1e-12) {
      // the clamp landed on the largest target itself; nothing to peel
      shifted = false;
    }
  }
  if (!shifted) {
    clamped = F;
    plan = PeelPlan{};
  }

  run.df = clamped.h;
  std::vector<double> uf_t = clamped.pos;
  std::vector<double> ug_t = G.pos;

  run_stage_one(run, ug_t, uf_t, steps);
  if (!plan.levels.empty()) {
    run_stage_two(run, ug_t, uf_t, plan, steps);
    // final polish with every target active at the finished shift
    Eigen::VectorXd target(run.n());
    for (int i = 0; i < run.Kg(); ++i) target(i) = ug_t[i];
    for (int j = 0; j < run.Kf(); ++j) target(run.Kg() + j) = uf_t[j];
    newton_full(run, target, run.alpha, 1e-13);
  }

  // joint translation to the centered gauge leaves the pair invariant
  run.z.array() -= run.delta().dot(run.z) / 2.0;

  WaveSolution sol;
  sol.zg.assign(run.z.data(), run.z.data() + run.Kg());
  sol.zf.assign(run.z.data() + run.Kg(), run.z.data() + run.n());
  sol.dg = run.dg;
  sol.df = run.df;
  sol.alpha = shifted ? run.alpha : 0.0;
  sol.max_condition = run.max_cond;
  sol.stages = std::max(run.stages, 1);
  return sol;
}

double solution_residual(const WaveSolution& sol, const PcData& F, const PcData& G,
                         const KernelSpec& kern) {
  auto [uf, ug] = forward_map(sol.zf, sol.zg, sol.df, sol.dg, sol.alpha, kern);
  // the solver may carry more f jumps than F when a clamp level matched an
  // original target; compare against the collapsed target list
  PcData got;
  got.pos = uf;
  got.h = sol.df;
  PcData gc = collapse(got);
  double r = 0;
  if (gc.pos.size() != F.pos.size()) return std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < F.pos.size(); ++j) r = std::max(r, std::abs(gc.pos[j] - F.pos[j]));
  for (size_t i = 0; i < G.pos.size(); ++i) r = std::max(r, std::abs(ug[i] - G.pos[i]));
  return r;
}

WaveSolution solve_pair(const ExitFunction& hf, const ExitFunction& hg, const KernelSpec& kern,
                        int steps, int rk_order) {
  PcData F = collapse(pc_of(hf));
  PcData G = collapse(pc_of(hg));
  const double A = mass_mean(F) + mass_mean(G) - 1.0;
  const bool flip = A < -1e-13;

  check_strict_gap(F, G, "input pair");

  WaveSolution sol = flip ? solve_oriented(flip_pc(F), flip_pc(G), kern, steps, rk_order)
                          : solve_oriented(F, G, kern, steps, rk_order);
  if (flip) {
    std::reverse(sol.zf.begin(), sol.zf.end());
    std::reverse(sol.df.begin(), sol.df.end());
    for (double& x : sol.zf) x = -x;
    std::reverse(sol.zg.begin(), sol.zg.end());
    std::reverse(sol.dg.begin(), sol.dg.end());
    for (double& x : sol.zg) x = -x;
    sol.alpha = -sol.alpha;
    double c = 0;
    for (size_t i = 0; i < sol.zg.size(); ++i) c += sol.dg[i] * sol.zg[i];
    for (size_t j = 0; j < sol.zf.size(); ++j) c += sol.df[j] * sol.zf[j];
    c /= 2;
    for (double& x : sol.zg) x -= c;
    for (double& x : sol.zf) x -= c;
  }
  sol.kernel_id = kern.to_json().dump();
  sol.residual = solution_residual(sol, F, G, kern);
  if (!(sol.residual < 1e-8))
    throw Error("StepCollapse", "continuation finished away from the targets");
  return sol;
}

bool is_boxcar(const KernelSpec& k) { return k.to_json().at("shape") == "boxcar"; }

}  // namespace

std::pair<std::vector<double>, std::vector<double>> forward_map(
    const std::vector<double>& zf, const std::vector<double>& zg, const std::vector<double>& df,
    const std::vector<double>& dg, double alpha, const KernelSpec& k) {
  if (zf.size() != df.size() || zg.size() != dg.size() || zf.empty() || zg.empty())
    throw Error("BadInput", "jump positions and heights must pair up");
  std::vector<double> uf(zf.size()), ug(zg.size());
  for (size_t j = 0; j < zf.size(); ++j) {
    double s = 0;
    for (size_t i = 0; i < zg.size(); ++i) s += dg[i] * k.cdf(zf[j] + alpha - zg[i]);
    uf[j] = s;
  }
  for (size_t i = 0; i < zg.size(); ++i) {
    double s = 0;
    for (size_t j = 0; j < zf.size(); ++j) s += df[j] * k.cdf(zg[i] - zf[j]);
    ug[i] = s;
  }
  return {uf, ug};
}

std::pair<std::vector<double>, std::vector<double>> forward_map(const WaveSolution& sol,
                                                                const KernelSpec& k) {
  return forward_map(sol.zf, sol.zg, sol.df, sol.dg, sol.alpha, k);
}

WaveSolution continuation_solve(const ExitFunction& hf, const ExitFunction& hg,
                                const KernelSpec& k, int steps, int rk_order) {
  if (steps < 4) throw Error("BadConfig", "continuation needs at least 4 steps");
  if (rk_order != 4 && rk_order != 5) throw Error("BadConfig", "rk_order must be 4 or 5");

  if (!is_boxcar(k)) {
    WaveSolution sol = solve_pair(hf, hg, k, steps, rk_order);
    sol.alpha_limit = sol.alpha;
    return sol;
  }

  // boxcar kernels violate the strict-positivity the continuation needs;
  // mollify at shrinking widths and extrapolate the shift to width zero
  const double W = k.W();
  double a[3];
  WaveSolution finest;
  const double widths[3] = {0.25, 0.125, 0.0625};
  for (int i = 0; i < 3; ++i) {
    KernelSpec mk = KernelSpec::mollified_boxcar(W, widths[i] * W);
    finest = solve_pair(hf, hg, mk, steps, rk_order);
    a[i] = finest.alpha;
  }
  double d1 = a[1] - a[0], d2 = a[2] - a[1];
  double limit = a[2];
  if (std::abs(d2) > 1e-14 && std::abs(d1) > std::abs(d2) * 1.05 && d1 * d2 > 0) {
    // geometric tail: successive corrections shrink by a stable factor
    limit = a[2] + d2 * d2 / (d1 - d2);
  }
  finest.alpha_limit = limit;
  return finest;
}

WaveSolution inverse_space_iterate(const ExitFunction& hf, const ExitFunction& hg,
                                   const KernelSpec& k, double tol) {
  if (is_boxcar(k))
    throw Error("BadKernel", "inverse-space iteration needs a strictly positive kernel");
  PcData F = collapse(pc_of(hf));
  PcData G = collapse(pc_of(hg));
  const size_t Kf = F.pos.size(), Kg = G.pos.size();

  auto center = [&](std::vector<double>& zg, std::vector<double>& zf) {
    double c = 0;
    for (size_t i = 0; i < Kg; ++i) c += G.h[i] * zg[i];
    for (size_t j = 0; j < Kf; ++j) c += F.h[j] * zf[j];
    c /= 2;
    for (double& x : zg) x -= c;
    for (double& x : zf) x -= c;
    return c;
  };

  std::vector<double> zf(Kf, 0.0), zg(Kg, 0.0);
  // bootstrap sweep to get a consistent starting state
  for (size_t i = 0; i < Kg; ++i) zg[i] = solve_smooth(zf, F.h, k, G.pos[i]);
  for (size_t j = 0; j < Kf; ++j) zf[j] = solve_smooth(zg, G.h, k, F.pos[j]);
  center(zg, zf);

  double alpha = 0;
  bool converged = false;
  std::vector<double> zg_new(Kg), zf_new(Kf);
  for (int sweep = 0; sweep < 10000 && !converged; ++sweep) {
    for (size_t i = 0; i < Kg; ++i) zg_new[i] = solve_smooth(zf, F.h, k, G.pos[i]);
    for (size_t j = 0; j < Kf; ++j) zf_new[j] = solve_smooth(zg_new, G.h, k, F.pos[j]);
    double mx = -std::numeric_limits<double>::infinity();
    double mn = std::numeric_limits<double>::infinity();
    double drift = 0;
    for (size_t i = 0; i < Kg; ++i) {
      double d = zg_new[i] - zg[i];
      mx = std::max(mx, d);
      mn = std::min(mn, d);
      drift += G.h[i] * d;
    }
    for (size_t j = 0; j < Kf; ++j) {
      double d = zf_new[j] - zf[j];
      mx = std::max(mx, d);
      mn = std::min(mn, d);
      drift += F.h[j] * d;
    }
    alpha = drift / 2;
    zg = zg_new;
    zf = zf_new;
    converged = (mx - mn) < tol;
    if (!converged) center(zg, zf);
  }
  if (!converged)
    throw Error("NonContraction", "inverse-space sweeps did not reach a rigid translation");

  // the g sweep lags the f sweep by one shift: reporting zf - alpha aligns
  // both to the same epoch, after which the pair advances by alpha per sweep
  for (double& x : zf) x -= alpha;
  center(zg, zf);

  WaveSolution sol;
  sol.zf = zf;
  sol.zg = zg;
  sol.df = F.h;
  sol.dg = G.h;
  sol.alpha = alpha;
  sol.alpha_limit = alpha;
  sol.kernel_id = k.to_json().dump();
  sol.stages = 1;
  sol.residual = solution_residual(sol, F, G, k);
  return sol;
}

CertReport certify(const WaveSolution& sol, const ExitFunction& hf, const ExitFunction& hg,
                   const KernelSpec& k) {
  PcData F = collapse(pc_of(hf));
  PcData G = collapse(pc_of(hg));
  if (sol.zg.size() != G.pos.size() || sol.dg.size() != G.pos.size() || sol.zf.size() < 1)
    throw Error("CertificationFailed", "solution jump structure does not match the targets");

  CertReport rep;
  rep.residual = solution_residual(sol, F, G, k);
  if (!(rep.residual < 1e-6))
    throw Error("CertificationFailed", "residual: solution does not reproduce the targets");

  rep.A = area_gap(hf, hg);

  auto [uf, ug] = forward_map(sol, k);
  double arec = -1.0;
  for (size_t j = 0; j < uf.size(); ++j) arec += sol.df[j] * uf[j];
  for (size_t i = 0; i < ug.size(); ++i) arec += sol.dg[i] * ug[i];
  rep.A_rec = arec;

  // (i) an unshifted wave forces a balanced pair
  if (std::abs(sol.alpha) <= 1e-12) {
    rep.alpha_zero_area_ok = std::abs(rep.A_rec) < 1e-8;
    if (!rep.alpha_zero_area_ok)
      throw Error("CertificationFailed", "alpha-zero area: unshifted wave with unbalanced pair");
  }

  // (ii) the shift pays for the area gap at rate at most sup omega
  rep.shift_bound_ok = std::abs(sol.alpha) * k.sup_norm() >= std::abs(rep.A) - 1e-8;
  if (!rep.shift_bound_ok)
    throw Error("CertificationFailed", "shift bound: |alpha| sup omega < |A|");

  // reconstructed unshifted exit pair; evaluating the smoothed profiles at the
  // jump positions gives the exact piecewise-constant reconstruction
  auto [uf0, ug0] = forward_map(sol.zf, sol.zg, sol.df, sol.dg, 0.0, k);
  ExitFunction hfr = pc_fn(PcData{uf0, sol.df});
  ExitFunction hgr = pc_fn(PcData{ug0, sol.dg});

  // (iii) the potential of the reconstruction is nonnegative on the cut grid
  double ximin = std::numeric_limits<double>::infinity();
  std::vector<double> acuts{0.0}, bcuts{0.0};
  {
    double c = 0;
    for (double h : sol.dg) acuts.push_back(std::min(1.0, c += h));
    c = 0;
    for (double h : sol.df) bcuts.push_back(std::min(1.0, c += h));
  }
  for (double a : acuts)
    for (double b : bcuts) {
      double xi = hgr.inv_integral_to(a) + hfr.inv_integral_to(b) - a * b;
      ximin = std::min(ximin, xi);
    }
  rep.xi_min = ximin;
  rep.xi_nonneg_ok = ximin >= -1e-9;
  if (!rep.xi_nonneg_ok)
    throw Error("CertificationFailed", "xi: negative coupling integral on the cut grid");

  // (iv) transition-length bound between the 5% and 95% levels
  {
    const double a = 0.05, b = 0.95;
    const double L = k.W();
    const double eL = 2.0 * k.cdf(-L);
    double dmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 512; ++i) {
      double u = a + (b - a) * i / 512.0;
      dmin = std::min(dmin, phi(hfr, hgr, u, hfr.eval(u, Side::Right)));
    }
    double xa = solve_smooth(sol.zg, sol.dg, k, a);
    double xb = solve_smooth(sol.zg, sol.dg, k, b);
    rep.transition_lhs = (0.5 * dmin - eL) * std::floor((xb - xa) / (2.0 * L));
    rep.transition_ok = rep.transition_lhs <= 1.0 + 1e-9;
    if (!rep.transition_ok)
      throw Error("CertificationFailed", "transition: profile width excludes a wave");
  }

  return rep;
}

}  // namespace scw
