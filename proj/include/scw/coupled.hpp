#pragma once
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "scw/exitfn.hpp"
#include "scw/kernel.hpp"

namespace scw {

// Known-bit seeding applied after every update. Positions are in x units of the
// profile pitch; forced values persist because they are re-zeroed each step.
struct Termination {
  enum class Kind { None, OneSidedLeft, TwoSided };
  Kind kind = Kind::None;
  double length = 0.0;  // TwoSided: zeros outside [0, length]

  static Termination none() { return {}; }
  static Termination one_sided_left() { return {Kind::OneSidedLeft, 0.0}; }
  static Termination two_sided(double length) { return {Kind::TwoSided, length}; }
};

enum class Limit { ToZero, ToOne, ToWavePair, Stalled };

struct InitSpec {
  enum class Kind { Ones, Step, Profile };
  Kind kind = Kind::Ones;
  double step_pos = 0.0;    // Step: zeros strictly left of this x
  SpatialProfile profile;   // Profile: pitch must match the run's

  static InitSpec ones() { return {}; }
  static InitSpec step(double pos) {
    InitSpec s;
    s.kind = Kind::Step;
    s.step_pos = pos;
    return s;
  }
  static InitSpec from_profile(SpatialProfile p) {
    InitSpec s;
    s.kind = Kind::Profile;
    s.profile = std::move(p);
    return s;
  }
};

struct RunConfig {
  double delta = 0.01;
  double window = 40.0;  // active span [0, window]; storage extends 4W past each end
  Termination term = Termination::none();
  InitSpec init;
  int max_iters = 2000;
  double tol = 1e-10;
  double front_level = 0.5;  // fraction of the plateau height the front tracker follows
  int snapshot_every = 0;  // record every k-th iterate (0: keep none)
};

struct RunDiagnostics {
  SpatialProfile f, g;  // final pair (g from the last completed update)
  int iterations = 0;
  bool converged = false;         // sup-change below tol three times in a row
  bool monotone_profiles = true;  // every iterate stayed monotone in x
  Limit limit = Limit::Stalled;
  double A = 0.0;         // area gap of the pair the run used
  double plateau = 1.0;   // v of the largest stable crossing (constant-phase level)
  std::vector<double> front;  // level crossing of f after each iteration (NaN: none)
  double drift = std::numeric_limits<double>::quiet_NaN();  // front shift per iteration
  double drift_se = std::numeric_limits<double>::quiet_NaN();
  bool front_hit_edge = false;  // front entered the guard band next to storage edge
  double sup_change_last = 0.0;
  std::vector<std::pair<int, SpatialProfile>> snapshots;
};

// One synchronous sweep: g = hg(f (*) omega), f_next = hf(g (*) omega), then
// termination zeroing on f_next. Returns (g, f_next). Throws PitchMismatch when
// the profile and kernel pitches disagree.
std::pair<SpatialProfile, SpatialProfile> step(const SpatialProfile& f, const ExitFunction& hf,
                                               const ExitFunction& hg, const DiscreteKernel& k,
                                               const Termination& term);

RunDiagnostics run(const ExitFunction& hf, const ExitFunction& hg, const KernelSpec& kernel,
                   const RunConfig& cfg);

struct WaveSpeed {
  double speed = 0;
  double stderr_ = 0;
  int samples = 0;
};

// Least-squares front drift per iteration over samples past burn_in. Requires at
// least 10 consecutive valid samples (NoFront otherwise); the measured sign must
// agree with sgn(A) recorded in the diagnostics.
WaveSpeed wave_speed(const RunDiagnostics& diag, int burn_in);

// Two-sided coupling sum of the discrete fixed-point identity, evaluated in both
// summation orders (f-differenced and g-differenced). The two agree exactly; both
// are returned so callers can cross-check.
std::pair<double, double> xi_discrete_forms(const SpatialProfile& f, const SpatialProfile& g,
                                            const DiscreteKernel& k, long i1, long i2);
// The cross-checked value (throws FormMismatch if the two orders disagree).
double xi_discrete(const SpatialProfile& f, const SpatialProfile& g, const DiscreteKernel& k,
                   long i1, long i2);

// Exit functions induced by an interpolating profile pair: monotone pairing of
// (g smoothed, f) and (f smoothed, g) samples, joined piecewise-linearly.
std::pair<ExitFunction, ExitFunction> reconstruct_pair(const SpatialProfile& f,
                                                       const SpatialProfile& g,
                                                       const DiscreteKernel& k);

struct FixedPointIdentity {
  double lhs = 0;       // two-integral expression through the reconstructed pair
  double xi = 0;        // discrete coupling sum
  double residual = 0;  // |lhs - xi|, O(delta) at a spatial fixed point
};

// Verifies (f, g) is a fixed point of one sweep (NotAFixedPoint if it moves by
// more than 10*tol), then evaluates both sides of the identity at cut indices
// i1 (g side) and i2 (f side).
FixedPointIdentity fixed_point_identity_check(const SpatialProfile& f, const SpatialProfile& g,
                                              const ExitFunction& hf, const ExitFunction& hg,
                                              const DiscreteKernel& k, const Termination& term,
                                              long i1, long i2, double tol = 1e-8);

}  // namespace scw
