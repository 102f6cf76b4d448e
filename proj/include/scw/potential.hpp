#pragma once
#include <functional>
#include <string>
#include <vector>

#include "scw/exitfn.hpp"

namespace scw {

struct Crossing {
  double u = 0, v = 0;
  double phi = 0;
  bool continuum = false;  // endpoint of a connected crossing continuum
};

enum class GapVerdict { StrictGap, NonStrictGap, Fails };

struct PotentialReport {
  double A = 0;
  std::vector<Crossing> crossings;  // component-wise ordered, includes (0,0) and (1,1)
  double m = 0;                     // global minimum of phi, attained at a crossing
  Crossing cross_m_min, cross_m_max;
  GapVerdict verdict = GapVerdict::Fails;
  Crossing witness;  // minimizing nontrivial crossing
};

// Phi(hf,hg;u,v) = int_0^u hg^{-1} + int_0^v hf^{-1} - u v
double phi(const ExitFunction& hf, const ExitFunction& hg, double u, double v);

// A(hf,hg) = Phi(1,1) = 1 - int hf - int hg
double area_gap(const ExitFunction& hf, const ExitFunction& hg);

// Ordered crossing list; (0,0) and (1,1) always included. Continua are reported
// by their extreme points with the continuum flag set.
std::vector<Crossing> crossings(const ExitFunction& hf, const ExitFunction& hg,
                                double tol = 1e-12);

// Throws NoNontrivialCrossing in the trivial regime.
PotentialReport gap_verdict(const ExitFunction& hf, const ExitFunction& hg);

// Crossings that are local minima of phi along the ordered crossing list.
std::vector<Crossing> stable_crossings(const std::vector<Crossing>& ordered);

// A one-parameter model family; the scalar parameter is whatever the model
// declares (erasure rate, channel entropy, ...). hf must be non-decreasing in it.
struct ParametrizedFamily {
  std::string name;
  double bracket_lo = 1e-4, bracket_hi = 0.999;
  // upper end of the x-sweep in the tangency search; hard-decision models cap
  // it at 1/2 because the all-wrong trap region above is never reachable
  double chart_hi = 1.0;
  std::function<std::pair<ExitFunction, ExitFunction>(double)> pair_at;
  // fast scalar DE map (x, param) -> hf(hg(x)); used by the threshold search
  std::function<double(double, double)> de_map;
  // closed-form coupled threshold (BEC families)
  std::function<double()> closed_form_coupled;
  // override for the uncoupled search when the tangency sweep does not apply
  std::function<double()> closed_form_uncoupled;
};

// sup of parameters for which the component curves do not cross:
// inf over x of the parameter value that makes the curves touch at x.
double uncoupled_threshold(const ParametrizedFamily& fam);

// Parameter where the potential gap along the stable-crossing chain closes
// (rescaled A through zero under StrictGap). Throws NoSaturation when coupling
// never extends past the uncoupled threshold on the bracket (Gallager A style).
double coupled_threshold(const ParametrizedFamily& fam);

// All parameters at which some adjacent stable-crossing potential gap closes,
// sorted ascending; the first entry equals the coupled threshold. Two entries
// for the two-jump irregular erasure example.
std::vector<double> staircase_thresholds(const ParametrizedFamily& fam);

// sup of parameters for which plain iteration started from x0 = parameter
// converges to zero (start-determined threshold, distinct from the tangency
// criterion used by uncoupled_threshold)
double iteration_threshold(const ParametrizedFamily& fam);

}  // namespace scw
