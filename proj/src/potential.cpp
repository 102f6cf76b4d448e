#include "scw/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scw/numerics.hpp"

namespace scw {

double phi(const ExitFunction& hf, const ExitFunction& hg, double u, double v) {
  return hg.inv_integral_to(u) + hf.inv_integral_to(v) - u * v;
}

double area_gap(const ExitFunction& hf, const ExitFunction& hg) {
  return phi(hf, hg, 1.0, 1.0);
}

namespace {

// At a crossing, u v - int_0^v hg - int_0^u hf equals phi(u,v); forward
// integrals only, so no inverse evaluations are needed on the hot path.
double phi_at_crossing(const ExitFunction& hf, const ExitFunction& hg,
                       double u, double v) {
  return u * v - hg.integral_to(v) - hf.integral_to(u);
}

struct Interval {
  double lo, hi;
};

Interval graph_interval_f(const ExitFunction& hf, double u) {
  return {hf.eval(u, Side::Left), hf.eval(u, Side::Right)};
}

Interval graph_interval_ginv(const ExitFunction& hginv, double u) {
  return {hginv.eval(u, Side::Left), hginv.eval(u, Side::Right)};
}

// v-interval shared by both graphs above u, if any.
bool overlap_at(const ExitFunction& hf, const ExitFunction& hginv, double u,
                double tol, double* v_out) {
  Interval f = graph_interval_f(hf, u);
  Interval g = graph_interval_ginv(hginv, u);
  double lo = std::max(f.lo, g.lo), hi = std::min(f.hi, g.hi);
  if (lo > hi + tol) return false;
  *v_out = clamp01(0.5 * (lo + std::max(lo, hi)));
  return true;
}

}  // namespace

std::vector<Crossing> crossings(const ExitFunction& hf, const ExitFunction& hg,
                                double tol) {
  const ExitFunction hginv = hg.inverse();
  const int n = 1 << 14;
  const double zero_tol = std::max(tol, 1e-13);

  auto diff = [&](double u) { return hf(u) - hginv(u); };

  std::vector<double> d(n + 1);
  for (int i = 0; i <= n; ++i) d[i] = diff(static_cast<double>(i) / n);

  auto sign_of = [&](double x) -> int {
    if (x > zero_tol) return 1;
    if (x < -zero_tol) return -1;
    return 0;
  };

  std::vector<Crossing> found;
  auto push = [&](double u, bool continuum) {
    double v;
    if (!overlap_at(hf, hginv, u, 1e-9, &v)) v = clamp01(hf(u));
    found.push_back({clamp01(u), v, 0.0, continuum});
  };

  // interior scan; trivial endpoints get appended by convention afterwards
  int i = 1;
  while (i < n) {
    int si = sign_of(d[i]);
    if (si == 0) {
      int j = i;
      while (j + 1 <= n - 1 && sign_of(d[j + 1]) == 0) ++j;
      double ua = static_cast<double>(i) / n, ub = static_cast<double>(j) / n;
      if (j > i) {
        // connected continuum; extremes only (the endpoint filter below folds
        // runs that reach 0 or 1 into the trivial crossings)
        push(ua, true);
        push(ub, true);
      } else {
        push(ua, false);
      }
      i = j + 1;
      continue;
    }
    int sj = sign_of(d[i + 1]);
    if (sj != 0 && sj != si) {
      // sign change: root or jump; bisection converges to either
      double a = static_cast<double>(i) / n, b = static_cast<double>(i + 1) / n;
      double fa = d[i];
      for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
        double m = 0.5 * (a + b), fm = diff(m);
        if ((fa < 0) == (fm < 0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      push(0.5 * (a + b), false);
    }
    ++i;
  }

  std::vector<Crossing> out;
  bool zero_is_continuum = false, one_is_continuum = false;
  for (auto& c : found) {
    if (c.u <= 2.0 / n) {
      zero_is_continuum |= c.continuum;
      continue;
    }
    if (c.u >= 1.0 - 2.0 / n) {
      one_is_continuum |= c.continuum;
      continue;
    }
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(),
            [](const Crossing& a, const Crossing& b) { return a.u < b.u; });
  // merge near-duplicates from adjacent brackets
  std::vector<Crossing> dedup;
  for (auto& c : out) {
    if (!dedup.empty() && c.u - dedup.back().u < 1e-9 &&
        std::abs(c.v - dedup.back().v) < 1e-6) {
      dedup.back().continuum |= c.continuum;
      continue;
    }
    dedup.push_back(c);
  }
  std::vector<Crossing> res;
  res.push_back({0.0, 0.0, 0.0, zero_is_continuum});
  for (auto& c : dedup) res.push_back(c);
  res.push_back({1.0, 1.0, 0.0, one_is_continuum});
  for (auto& c : res) c.phi = phi_at_crossing(hf, hg, c.u, c.v);
  res.front().phi = 0.0;
  return res;
}

std::vector<Crossing> stable_crossings(const std::vector<Crossing>& ordered) {
  std::vector<Crossing> out;
  const int n = static_cast<int>(ordered.size());
  for (int i = 0; i < n; ++i) {
    bool lo_ok = (i == 0) || ordered[i].phi <= ordered[i - 1].phi;
    bool hi_ok = (i == n - 1) || ordered[i].phi <= ordered[i + 1].phi;
    if (lo_ok && hi_ok) out.push_back(ordered[i]);
  }
  return out;
}

PotentialReport gap_verdict(const ExitFunction& hf, const ExitFunction& hg) {
  PotentialReport rep;
  rep.A = area_gap(hf, hg);
  rep.crossings = crossings(hf, hg);
  if (rep.crossings.size() <= 2)
    throw Error("NoNontrivialCrossing",
                "gap_verdict: only trivial crossings present");

  rep.m = std::min(0.0, rep.A);
  for (auto& c : rep.crossings) rep.m = std::min(rep.m, c.phi);
  bool have_min = false;
  for (auto& c : rep.crossings) {
    if (c.phi <= rep.m + 1e-12) {
      if (!have_min) rep.cross_m_min = c, have_min = true;
      rep.cross_m_max = c;
    }
  }

  const double floor_level = std::max(0.0, rep.A);
  const double margin = 1e-9;
  double worst = std::numeric_limits<double>::infinity();
  for (size_t i = 1; i + 1 < rep.crossings.size(); ++i) {
    double rel = rep.crossings[i].phi - floor_level;
    if (rel < worst) {
      worst = rel;
      rep.witness = rep.crossings[i];
    }
  }
  if (worst > margin)
    rep.verdict = GapVerdict::StrictGap;
  else if (worst >= -margin)
    rep.verdict = GapVerdict::NonStrictGap;
  else
    rep.verdict = GapVerdict::Fails;
  return rep;
}

namespace {

double de_eval(const ParametrizedFamily& fam, double x, double p) {
  if (fam.de_map) return fam.de_map(x, p);
  auto [hf, hg] = fam.pair_at(p);
  return hf(hg(x));
}

// parameter at which the chart touches x: root in p of de(x,p) = x
double touch_param(const ParametrizedFamily& fam, double x, double ptol) {
  double lo = fam.bracket_lo, hi = fam.bracket_hi;
  double flo = de_eval(fam, x, lo) - x;
  // no transition inside the bracket: x is blocked at every parameter (this
  // happens near x=1 for hard-decision models where (1,1) is always fixed)
  if (flo >= 0) return std::numeric_limits<double>::infinity();
  double fhi = de_eval(fam, x, hi) - x;
  if (fhi <= 0) return std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200 && hi - lo > ptol; ++it) {
    double m = 0.5 * (lo + hi);
    ((de_eval(fam, x, m) - x < 0) ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double uncoupled_threshold(const ParametrizedFamily& fam) {
  if (fam.closed_form_uncoupled) return fam.closed_form_uncoupled();
  auto eps_of_x = [&](double x) { return touch_param(fam, x, 1e-9); };
  auto [xstar, eps] =
      golden_min(eps_of_x, 1e-7, std::min(1.0 - 1e-7, fam.chart_hi), 1e-7, 1024);
  (void)xstar;
  return std::min(eps, fam.bracket_hi);
}

namespace {

// decode-by-coupling predicate: potential strictly increases along the
// stable-crossing chain away from the origin
bool wave_decodes(const ParametrizedFamily& fam, double p, int min_gap_index) {
  auto [hf, hg] = fam.pair_at(p);
  auto cr = crossings(hf, hg);
  if (cr.size() <= 2) return true;
  auto stable = stable_crossings(cr);
  // the chain must be anchored at the origin; an unstable origin means the
  // potential dips below zero immediately and no wave can pass
  if (stable.empty() || stable.front().u > 1e-9) return false;
  int gaps = static_cast<int>(stable.size()) - 1;
  for (int k = min_gap_index; k <= gaps; ++k)
    if (stable[k].phi - stable[k - 1].phi <= 0) return false;
  return true;
}

double decode_root(const ParametrizedFamily& fam, int min_gap_index) {
  double lo = fam.bracket_lo, hi = fam.bracket_hi;
  if (!wave_decodes(fam, lo, min_gap_index))
    throw Error("BadBracket", fam.name + ": no decoding at bracket bottom");
  if (wave_decodes(fam, hi, min_gap_index))
    throw Error("BadBracket", fam.name + ": decoding persists at bracket top");
  for (int it = 0; it < 200 && hi - lo > 5e-8; ++it) {
    double m = 0.5 * (lo + hi);
    (wave_decodes(fam, m, min_gap_index) ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double coupled_threshold(const ParametrizedFamily& fam) {
  if (fam.closed_form_coupled) return fam.closed_form_coupled();
  double root = decode_root(fam, 1);
  double unc = uncoupled_threshold(fam);
  if (root - unc <= 3e-5)
    throw Error("NoSaturation",
                fam.name + ": coupling does not extend past the uncoupled "
                           "threshold on this bracket");
  return root;
}

double iteration_threshold(const ParametrizedFamily& fam) {
  auto decodes = [&](double p) {
    double x = p;
    for (int it = 0; it < 20000; ++it) {
      double nx = de_eval(fam, x, p);
      if (nx < 1e-9) return true;
      if (x - nx < 1e-14 && nx > 1e-6) return false;  // plateaued above zero
      x = nx;
    }
    return x < 1e-9;
  };
  double lo = fam.bracket_lo, hi = fam.bracket_hi;
  if (!decodes(lo)) throw Error("BadBracket", fam.name + ": no convergence at bracket bottom");
  if (decodes(hi)) return hi;
  for (int it = 0; it < 200 && hi - lo > 5e-8; ++it) {
    double m = 0.5 * (lo + hi);
    (decodes(m) ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> staircase_thresholds(const ParametrizedFamily& fam) {
  auto [hf, hg] = fam.pair_at(fam.bracket_hi);
  auto stable_hi = stable_crossings(crossings(hf, hg));
  int max_gaps = static_cast<int>(stable_hi.size()) - 1;

  std::vector<double> out;
  for (int k = 1; k <= std::max(1, max_gaps); ++k) {
    if (wave_decodes(fam, fam.bracket_hi, k)) continue;  // closes above bracket
    out.push_back(decode_root(fam, k));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [](double a, double b) { return std::abs(a - b) < 1e-6; }),
            out.end());
  return out;
}

}  // namespace scw
