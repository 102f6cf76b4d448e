#include "scw/coupled.hpp"

#include <algorithm>
#include <cmath>

#include "scw/potential.hpp"

namespace scw {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_pitch(double a, double b) {
  if (std::abs(a - b) > 1e-12 * std::max(a, b))
    throw Error("PitchMismatch", "profile and kernel pitches differ");
}

long zero_cut_hi(const Termination& t, double delta) {
  // last allowed index under two-sided zeroing
  return std::lround(t.length / delta);
}

void apply_termination(SpatialProfile& p, const Termination& t) {
  switch (t.kind) {
    case Termination::Kind::None:
      return;
    case Termination::Kind::OneSidedLeft:
      for (long i = p.imin(); i < 0 && i <= p.imax(); ++i) p.v[static_cast<size_t>(i - p.i0)] = 0.0;
      p.left_limit = 0.0;
      return;
    case Termination::Kind::TwoSided: {
      long hi = zero_cut_hi(t, p.delta);
      for (long i = p.imin(); i <= p.imax(); ++i)
        if (i < 0 || i > hi) p.v[static_cast<size_t>(i - p.i0)] = 0.0;
      p.left_limit = 0.0;
      p.right_limit = 0.0;
      return;
    }
  }
}

void map_values(SpatialProfile& p, const ExitFunction& h) {
  for (auto& x : p.v) x = h(x);
  p.left_limit = h(p.left_limit);
  p.right_limit = h(p.right_limit);
}

// first upcrossing of `level`, including one virtual cell into each limit
double front_of(const SpatialProfile& f, double level) {
  double prev = f.at(f.imin() - 1);
  if (prev >= level) return kNaN;  // already above on the left: no rising front
  for (long i = f.imin(); i <= f.imax() + 1; ++i) {
    double cur = f.at(i);
    if (prev < level && cur >= level) {
      double t = (cur > prev) ? (level - prev) / (cur - prev) : 1.0;
      return f.x_of(i - 1) + t * f.delta;
    }
    prev = cur;
  }
  return kNaN;
}

}  // namespace

std::pair<SpatialProfile, SpatialProfile> step(const SpatialProfile& f, const ExitFunction& hf,
                                               const ExitFunction& hg, const DiscreteKernel& k,
                                               const Termination& term) {
  check_pitch(f.delta, k.delta);
  SpatialProfile g = convolve(f, k);
  map_values(g, hg);
  SpatialProfile fn = convolve(g, k);
  map_values(fn, hf);
  apply_termination(fn, term);
  return {std::move(g), std::move(fn)};
}

RunDiagnostics run(const ExitFunction& hf, const ExitFunction& hg, const KernelSpec& kernel,
                   const RunConfig& cfg) {
  if (cfg.delta <= 0 || cfg.window <= 0) throw Error("BadConfig", "delta and window must be positive");
  const double W = kernel.W();
  Termination term = cfg.term;
  if (term.kind == Termination::Kind::TwoSided && term.length <= 0) term.length = cfg.window;
  if (term.kind == Termination::Kind::TwoSided && cfg.window < term.length + 1e-12)
    throw Error("BadConfig", "window shorter than the two-sided termination span");

  DiscreteKernel k = kernel.discretize(cfg.delta);
  const long pad_n = static_cast<long>(std::ceil(4.0 * W / cfg.delta));
  const long n_win = std::lround(cfg.window / cfg.delta);
  const long ilo = -pad_n, ihi = n_win + pad_n;

  SpatialProfile f;
  f.delta = cfg.delta;
  f.i0 = ilo;
  f.v.assign(static_cast<size_t>(ihi - ilo + 1), 1.0);
  f.left_limit = 1.0;
  f.right_limit = 1.0;
  switch (cfg.init.kind) {
    case InitSpec::Kind::Ones:
      break;
    case InitSpec::Kind::Step: {
      for (long i = ilo; i <= ihi; ++i)
        if (f.x_of(i) < cfg.init.step_pos) f.v[static_cast<size_t>(i - ilo)] = 0.0;
      f.left_limit = 0.0;
      break;
    }
    case InitSpec::Kind::Profile: {
      check_pitch(cfg.init.profile.delta, cfg.delta);
      for (long i = ilo; i <= ihi; ++i) f.v[static_cast<size_t>(i - ilo)] = cfg.init.profile.at(i);
      f.left_limit = cfg.init.profile.left_limit;
      f.right_limit = cfg.init.profile.right_limit;
      break;
    }
  }
  apply_termination(f, term);

  RunDiagnostics diag;
  diag.A = area_gap(hf, hg);
  try {
    auto stab = stable_crossings(crossings(hf, hg));
    diag.plateau = stab.empty() ? 1.0 : stab.back().v;
  } catch (const Error&) {
    diag.plateau = 1.0;
  }

  const long active_lo = 0;
  const long active_hi = (term.kind == Termination::Kind::TwoSided) ? zero_cut_hi(term, cfg.delta)
                                                                    : n_win;
  const double guard = 2.0 * W;

  SpatialProfile g;
  int calm = 0;
  for (int t = 0; t < cfg.max_iters; ++t) {
    auto [g2, f2] = step(f, hf, hg, k, term);
    double d = 0.0;
    for (size_t j = 0; j < f.v.size(); ++j) d = std::max(d, std::abs(f2.v[j] - f.v[j]));
    d = std::max(d, std::abs(f2.left_limit - f.left_limit));
    d = std::max(d, std::abs(f2.right_limit - f.right_limit));
    f = std::move(f2);
    g = std::move(g2);
    diag.iterations = t + 1;
    diag.sup_change_last = d;
    if (diag.monotone_profiles && !f.monotone(1e-9)) diag.monotone_profiles = false;
    diag.front.push_back(front_of(f, cfg.front_level * diag.plateau));
    if (cfg.snapshot_every > 0 && (t % cfg.snapshot_every) == 0) diag.snapshots.emplace_back(t, f);

    calm = (d < cfg.tol) ? calm + 1 : 0;
    if (calm >= 3) {
      diag.converged = true;
      break;
    }
    double fr = diag.front.back();
    if (term.kind == Termination::Kind::None && std::isfinite(fr) &&
        (fr <= f.x_of(ilo) + guard || fr >= f.x_of(ihi) - guard)) {
      diag.front_hit_edge = true;
      break;
    }
  }
  diag.f = std::move(f);
  diag.g = std::move(g);

  // drift estimate over the later 60% of valid front samples
  {
    int n = static_cast<int>(diag.front.size());
    int b = n - (n * 3) / 5;
    std::vector<double> ys;
    for (int i = b; i < n; ++i) {
      if (std::isfinite(diag.front[static_cast<size_t>(i)]))
        ys.push_back(diag.front[static_cast<size_t>(i)]);
      else
        ys.clear();  // keep only the trailing run of valid samples
    }
    if (ys.size() >= 10) {
      auto [sl, se] = ls_slope(ys);
      diag.drift = sl;
      diag.drift_se = se;
    }
  }

  double mx = 0.0, mn = 1.0;
  for (long i = active_lo; i <= active_hi; ++i) {
    double x = diag.f.at(i);
    mx = std::max(mx, x);
    mn = std::min(mn, x);
  }
  if (mx < 1e-6) {
    diag.limit = Limit::ToZero;
  } else if (diag.converged && diag.plateau > 1e-3 && mx >= diag.plateau - 1e-2) {
    diag.limit = Limit::ToOne;
  } else if (!diag.converged && std::isfinite(diag.drift) &&
             std::abs(diag.drift) > std::max(1e-6, cfg.delta / 10.0)) {
    diag.limit = Limit::ToWavePair;
  } else {
    diag.limit = Limit::Stalled;
  }
  return diag;
}

WaveSpeed wave_speed(const RunDiagnostics& diag, int burn_in) {
  // regress on the true iteration index so gaps (front not yet born, or gone
  // after the wave dies out) do not distort the slope
  std::vector<std::pair<double, double>> pts;
  for (size_t i = static_cast<size_t>(std::max(burn_in, 0)); i < diag.front.size(); ++i)
    if (std::isfinite(diag.front[i])) pts.emplace_back(double(i), diag.front[i]);
  if (pts.size() < 10) throw Error("NoFront", "fewer than 10 usable front samples");
  auto [sl, se] = ls_slope_xy(pts);
  if (std::abs(diag.A) > 1e-12 && std::abs(sl) > 5.0 * se && sl * diag.A < 0)
    throw Error("SpeedSignMismatch", "front drift sign disagrees with the area gap");
  return {sl, se, static_cast<int>(pts.size())};
}

namespace {

// sum of term(i) over the signed index range (a, b]
template <typename F>
double signed_sum(long a, long b, F&& term) {
  double s = 0.0;
  if (a < b)
    for (long i = a + 1; i <= b; ++i) s += term(i);
  else if (b < a)
    for (long i = b + 1; i <= a; ++i) s -= term(i);
  return s;
}

}  // namespace

std::pair<double, double> xi_discrete_forms(const SpatialProfile& f, const SpatialProfile& g,
                                            const DiscreteKernel& k, long i1, long i2) {
  check_pitch(f.delta, g.delta);
  check_pitch(f.delta, k.delta);
  const double f2 = f.at(i2), g1 = g.at(i1);
  double F = 0.0, G = 0.0;
  for (int j = -k.radius; j <= k.radius; ++j) {
    double w = k.tap(j);
    if (w == 0.0) continue;
    F += w * signed_sum(i1 - j, i2, [&](long i) {
      return (2.0 * f2 - f.at(i) - f.at(i - 1)) * (g.at(i + j) - g.at(i + j - 1));
    });
    G += w * signed_sum(i2 - j, i1, [&](long i) {
      return (2.0 * g1 - g.at(i) - g.at(i - 1)) * (f.at(i + j) - f.at(i + j - 1));
    });
  }
  return {0.5 * F, 0.5 * G};
}

double xi_discrete(const SpatialProfile& f, const SpatialProfile& g, const DiscreteKernel& k,
                   long i1, long i2) {
  auto [a, b] = xi_discrete_forms(f, g, k, i1, i2);
  if (std::abs(a - b) > 1e-9 * (1.0 + std::abs(a)))
    throw Error("FormMismatch", "the two summation orders disagree");
  return a;
}

namespace {

ExitFunction pair_samples(const SpatialProfile& xs_src, const SpatialProfile& ys_src) {
  long lo = std::min(xs_src.imin(), ys_src.imin()) - 1;
  long hi = std::max(xs_src.imax(), ys_src.imax()) + 1;
  std::vector<std::pair<double, double>> pts;
  pts.reserve(static_cast<size_t>(hi - lo + 1));
  for (long i = lo; i <= hi; ++i) pts.emplace_back(clamp01(xs_src.at(i)), clamp01(ys_src.at(i)));
  std::sort(pts.begin(), pts.end());
  std::vector<double> xs, ys;
  xs.reserve(pts.size());
  ys.reserve(pts.size());
  for (auto& p : pts) {
    double y = ys.empty() ? p.second : std::max(p.second, ys.back());
    if (!xs.empty() && p.first <= xs.back() + 1e-13) {
      ys.back() = y;  // vertical run: keep the top of the tie
      continue;
    }
    xs.push_back(p.first);
    ys.push_back(y);
  }
  if (xs.size() < 2) throw Error("DegenerateProfile", "profile pair does not interpolate");
  return ExitFunction::piecewise_linear(std::move(xs), std::move(ys));
}

}  // namespace

std::pair<ExitFunction, ExitFunction> reconstruct_pair(const SpatialProfile& f,
                                                       const SpatialProfile& g,
                                                       const DiscreteKernel& k) {
  check_pitch(f.delta, g.delta);
  check_pitch(f.delta, k.delta);
  SpatialProfile fs = convolve(f, k);
  SpatialProfile gs = convolve(g, k);
  return {pair_samples(gs, f), pair_samples(fs, g)};
}

FixedPointIdentity fixed_point_identity_check(const SpatialProfile& f, const SpatialProfile& g,
                                              const ExitFunction& hf, const ExitFunction& hg,
                                              const DiscreteKernel& k, const Termination& term,
                                              long i1, long i2, double tol) {
  auto [g2, f2] = step(f, hf, hg, k, term);
  double move = 0.0;
  for (long i = f.imin(); i <= f.imax(); ++i) move = std::max(move, std::abs(f2.at(i) - f.at(i)));
  for (long i = g.imin(); i <= g.imax(); ++i) move = std::max(move, std::abs(g2.at(i) - g.at(i)));
  if (move > 10.0 * tol) throw Error("NotAFixedPoint", "one sweep moves the pair by " + std::to_string(move));

  auto [hfr, hgr] = reconstruct_pair(f, g, k);
  const double g1v = g.at(i1), f2v = f.at(i2);
  const double gl = g.left_limit, fl = f.left_limit;
  double lhs = (hgr.inv_integral_to(g1v) - hgr.inv_integral_to(gl)) +
               (hfr.inv_integral_to(f2v) - hfr.inv_integral_to(fl)) - f2v * g1v + fl * gl;
  double xi = xi_discrete(f, g, k, i1, i2);
  return {lhs, xi, std::abs(lhs - xi)};
}

}  // namespace scw
