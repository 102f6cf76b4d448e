#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scw/coupled.hpp"
#include "scw/exitfn.hpp"
#include "scw/kernel.hpp"
#include "scw/models.hpp"
#include "scw/numerics.hpp"
#include "scw/potential.hpp"
#include "scw/waves.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// 17 significant digits round-trip doubles exactly; used for CSV goldens
std::string fmt17(double x) {
  char b[48];
  std::snprintf(b, sizeof b, "%.17g", x);
  return b;
}

// JSON reports round to 12 digits so they stay stable across platforms
json round12(const json& j) {
  if (j.is_number_float()) {
    char b[48];
    std::snprintf(b, sizeof b, "%.12g", j.get<double>());
    return json(std::strtod(b, nullptr));
  }
  if (j.is_object()) {
    json o = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) o[it.key()] = round12(it.value());
    return o;
  }
  if (j.is_array()) {
    json a = json::array();
    for (const auto& v : j) a.push_back(round12(v));
    return a;
  }
  return j;
}

struct Options {
  std::string command;
  std::string model_path;
  std::string kernel_path;
  std::string out_dir;
  double delta = 0.01;
  double window = 40.0;
  std::string termination = "none";
  std::string init = "ones";
  int max_iters = 2000;
  double tol = 1e-10;
  int jobs = 1;
  int quantize = 64;
  int grid = 512;
  int steps = 64;
  long seed = 0xC0DE;
};

struct Resolved {
  Options opt;
  scw::ModelSpec model;
  scw::KernelSpec kernel = scw::KernelSpec::boxcar(1.0);
  json config;  // the self-describing echo
};

json load_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw scw::Error("BadConfig", std::string(what) + " file not readable: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw scw::Error("BadConfig", std::string(what) + " file is not valid JSON: " + e.what());
  }
  return j;
}

Resolved resolve(const Options& opt) {
  Resolved r{opt, scw::ModelSpec{}, scw::KernelSpec::boxcar(1.0), {}};
  if (opt.model_path.empty()) throw scw::Error("BadConfig", "--model is required");
  r.model = scw::ModelSpec::from_json(load_json_file(opt.model_path, "model"));
  if (!opt.kernel_path.empty())
    r.kernel = scw::KernelSpec::from_json(load_json_file(opt.kernel_path, "kernel"));

  r.config = json{{"command", opt.command},
                  {"model", r.model.to_json()},
                  {"kernel", r.kernel.to_json()},
                  {"delta", opt.delta},
                  {"window", opt.window},
                  {"termination", opt.termination},
                  {"init", opt.init},
                  {"max_iters", opt.max_iters},
                  {"tol", opt.tol},
                  {"jobs", opt.jobs},
                  {"quantize", opt.quantize},
                  {"grid", opt.grid},
                  {"steps", opt.steps},
                  {"seed", opt.seed},
                  {"out", opt.out_dir}};
  return r;
}

// the scalar channel parameter rides in the model JSON under its role name
double knob_of(const Resolved& r) {
  const json& m = r.model.raw;
  std::string role = r.model.knob_role();
  if (m.contains(role)) return m.at(role).get<double>();
  if (m.contains("knob")) return m.at("knob").get<double>();
  throw scw::Error("BadConfig", "model JSON must set \"" + role + "\" for this command");
}

int thread_count(const Options& opt) {
  if (const char* env = std::getenv("COUPLED_WAVES_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1, opt.jobs);
}

// index-addressed parallel map keeps output order deterministic for any pool size
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  int workers = std::min(jobs, n);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

void ensure_out(const Resolved& r) {
  if (r.opt.out_dir.empty()) return;
  fs::create_directories(r.opt.out_dir);
  std::ofstream cfg(fs::path(r.opt.out_dir) / "resolved_config.json", std::ios::binary);
  cfg << r.config.dump(2) << "\n";
}

void write_text(const Resolved& r, const std::string& name, const std::string& body) {
  if (r.opt.out_dir.empty()) return;
  std::ofstream out(fs::path(r.opt.out_dir) / name, std::ios::binary);
  out << body;
}

void emit_report(const Resolved& r, const std::string& name, json report) {
  report["config"] = r.config;
  std::string body = round12(report).dump(2) + "\n";
  write_text(r, name, body);
  std::cout << body;
}

const char* verdict_name(scw::GapVerdict v) {
  switch (v) {
    case scw::GapVerdict::StrictGap: return "StrictGap";
    case scw::GapVerdict::NonStrictGap: return "NonStrictGap";
    default: return "Fails";
  }
}

json crossing_json(const scw::Crossing& c) {
  return json{{"u", c.u}, {"v", c.v}, {"phi", c.phi}, {"continuum", c.continuum}};
}

std::string endpoint_verdict(const scw::ParametrizedFamily& fam, double p) {
  try {
    auto [hf, hg] = fam.pair_at(p);
    return verdict_name(scw::gap_verdict(hf, hg).verdict);
  } catch (const scw::Error& e) {
    return e.code;
  }
}

int cmd_threshold(const Resolved& r) {
  scw::ParametrizedFamily fam = r.model.family();
  if (r.model.raw.contains("bracket")) {
    auto br = r.model.raw.at("bracket").get<std::vector<double>>();
    if (br.size() != 2 || !(br[0] < br[1]))
      throw scw::Error("BadConfig", "model bracket must be [lo, hi] with lo < hi");
    fam.bracket_lo = br[0];
    fam.bracket_hi = br[1];
  }

  double unc = scw::uncoupled_threshold(fam);
  bool no_sat = false;
  double coup = std::numeric_limits<double>::quiet_NaN();
  try {
    coup = scw::coupled_threshold(fam);
  } catch (const scw::Error& e) {
    if (e.code != "NoSaturation") throw;
    no_sat = true;
  }

  const int npts = 33;
  std::vector<double> eps(npts), avals(npts);
  for (int i = 0; i < npts; ++i)
    eps[i] = fam.bracket_lo + (fam.bracket_hi - fam.bracket_lo) * i / double(npts - 1);
  parallel_for(npts, thread_count(r.opt), [&](int i) {
    auto [hf, hg] = fam.pair_at(eps[i]);
    avals[i] = scw::area_gap(hf, hg);
  });
  json trace = json::array();
  for (int i = 0; i < npts; ++i) trace.push_back(json::array({eps[i], avals[i]}));

  json report{{"command", "threshold"},
              {"uncoupled", unc},
              {"coupled", no_sat ? json(nullptr) : json(coup)},
              {"no_saturation", no_sat},
              {"area_trace", trace},
              {"endpoints",
               json{{"lo", json{{"param", fam.bracket_lo},
                                {"verdict", endpoint_verdict(fam, fam.bracket_lo)}}},
                    {"hi", json{{"param", fam.bracket_hi},
                                {"verdict", endpoint_verdict(fam, fam.bracket_hi)}}}}}};
  ensure_out(r);
  emit_report(r, "report.json", report);
  return no_sat ? 2 : 0;
}

int cmd_potential(const Resolved& r) {
  auto [hf, hg] = r.model.pair_at(knob_of(r));
  scw::PotentialReport rep = scw::gap_verdict(hf, hg);
  json cr = json::array();
  for (const auto& c : rep.crossings) cr.push_back(crossing_json(c));
  json report{{"command", "potential"},     {"A", rep.A},
              {"m", rep.m},                 {"verdict", verdict_name(rep.verdict)},
              {"witness", crossing_json(rep.witness)}, {"crossings", cr}};
  ensure_out(r);
  emit_report(r, "report.json", report);
  return 0;
}

// remap to the box between (0,0) and the largest nontrivial crossing; the
// decodable branch of the system lives there and its area gap is the one the
// figures quote
bool rescale_to_top_box(scw::ExitFunction& hf, scw::ExitFunction& hg) {
  try {
    auto cs = scw::crossings(hf, hg);
    const scw::Crossing* top = nullptr;
    for (const auto& c : cs)
      if (c.u > 1e-9 && c.u < 1.0 - 1e-9) top = &c;
    if (!top) return false;
    auto [hf2, hg2, map] = scw::rescale_to_box(hf, hg, {0.0, 0.0}, {top->u, top->v});
    hf = hf2;
    hg = hg2;
    return true;
  } catch (const scw::Error&) {
    return false;  // trivial crossing structure stays in raw coordinates
  }
}

int cmd_exit_chart(const Resolved& r) {
  auto [hf, hg] = r.model.pair_at(knob_of(r));
  bool rescaled = rescale_to_top_box(hf, hg);

  std::ostringstream csv;
  json hdr{{"config", r.config}, {"rescaled", rescaled}};
  csv << "u,hf,hg_inverse,signed_area # " << round12(hdr).dump() << "\n";
  scw::ExitFunction hg_inv = hg.inverse();
  for (int i = 1; i <= r.opt.grid; ++i) {
    double u = double(i) / r.opt.grid;
    double area = hg.inv_integral_to(u) - hf.integral_to(u);
    csv << fmt17(u) << ',' << fmt17(hf.eval(u, scw::Side::Right)) << ','
        << fmt17(hg_inv.eval(u, scw::Side::Right)) << ',' << fmt17(area) << "\n";
  }
  ensure_out(r);
  if (!r.opt.out_dir.empty()) {
    write_text(r, "exit_chart.csv", csv.str());
    emit_report(r, "report.json",
                json{{"command", "exit-chart"}, {"rows", r.opt.grid}, {"rescaled", rescaled}});
  } else {
    std::cout << csv.str();
  }
  return 0;
}

scw::Termination termination_of(const Options& opt) {
  if (opt.termination == "none") return scw::Termination::none();
  if (opt.termination == "left") return scw::Termination::one_sided_left();
  if (opt.termination == "both") return scw::Termination::two_sided(opt.window);
  throw scw::Error("BadConfig", "--termination must be none, left, or both");
}

scw::InitSpec init_of(const Options& opt) {
  if (opt.init == "ones") return scw::InitSpec::ones();
  if (opt.init.rfind("step:", 0) == 0) {
    char* end = nullptr;
    double x = std::strtod(opt.init.c_str() + 5, &end);
    if (end == nullptr || *end != '\0')
      throw scw::Error("BadConfig", "--init step:<x> needs a number");
    return scw::InitSpec::step(x);
  }
  if (opt.init.rfind("file:", 0) == 0) {
    std::string path = opt.init.substr(5);
    std::ifstream in(path);
    if (!in) throw scw::Error("BadConfig", "--init file not readable: " + path);
    scw::SpatialProfile p;
    p.delta = opt.delta;
    p.i0 = 0;
    double v;
    while (in >> v) p.v.push_back(v);
    if (p.v.empty()) throw scw::Error("BadConfig", "--init file holds no values");
    p.left_limit = 0.0;
    p.right_limit = p.v.back();
    return scw::InitSpec::from_profile(std::move(p));
  }
  throw scw::Error("BadConfig", "--init must be ones, step:<x>, or file:<path>");
}

const char* limit_name(scw::Limit l) {
  switch (l) {
    case scw::Limit::ToZero: return "ToZero";
    case scw::Limit::ToOne: return "ToOne";
    case scw::Limit::ToWavePair: return "ToWavePair";
    default: return "Stalled";
  }
}

int cmd_simulate(const Resolved& r) {
  auto [hf, hg] = r.model.pair_at(knob_of(r));
  scw::RunConfig cfg;
  cfg.delta = r.opt.delta;
  cfg.window = r.opt.window;
  cfg.term = termination_of(r.opt);
  cfg.init = init_of(r.opt);
  cfg.max_iters = r.opt.max_iters;
  cfg.tol = r.opt.tol;
  scw::RunDiagnostics diag = scw::run(hf, hg, r.kernel, cfg);

  json speed = nullptr;
  try {
    scw::WaveSpeed ws = scw::wave_speed(diag, diag.iterations / 2);
    speed = json{{"per_iteration", ws.speed}, {"stderr", ws.stderr_}, {"samples", ws.samples}};
  } catch (const scw::Error& e) {
    if (diag.limit == scw::Limit::ToWavePair) speed = json{{"error", e.code}};
  }

  json report{{"command", "simulate"},
              {"iterations", diag.iterations},
              {"converged", diag.converged},
              {"monotone_profiles", diag.monotone_profiles},
              {"limit", limit_name(diag.limit)},
              {"A", diag.A},
              {"plateau", diag.plateau},
              {"front_last", diag.front.empty() ? json(nullptr) : json(diag.front.back())},
              {"drift", std::isnan(diag.drift) ? json(nullptr) : json(diag.drift)},
              {"front_hit_edge", diag.front_hit_edge},
              {"sup_change_last", diag.sup_change_last},
              {"speed", speed}};

  ensure_out(r);
  if (!r.opt.out_dir.empty()) {
    scw::DiscreteKernel dk = r.kernel.discretize(cfg.delta);
    scw::SpatialProfile fs = scw::convolve(diag.f, dk);
    scw::SpatialProfile gs = scw::convolve(diag.g, dk);
    std::ostringstream csv;
    csv << "x,f,g,f_smoothed,g_smoothed\n";
    for (long i = diag.f.imin(); i <= diag.f.imax(); ++i) {
      csv << fmt17(diag.f.x_of(i)) << ',' << fmt17(diag.f.at(i)) << ',' << fmt17(diag.g.at(i))
          << ',' << fmt17(fs.at(i)) << ',' << fmt17(gs.at(i)) << "\n";
    }
    write_text(r, "profile.csv", csv.str());
  }
  emit_report(r, "diagnostics.json", report);
  return 0;
}

int cmd_wave(const Resolved& r) {
  auto [hf, hg] = r.model.pair_at(knob_of(r));
  bool rescaled = rescale_to_top_box(hf, hg);
  scw::ExitFunction hfq = hf.quantized(r.opt.quantize);
  scw::ExitFunction hgq = hg.quantized(r.opt.quantize);
  scw::WaveSolution sol = scw::continuation_solve(hfq, hgq, r.kernel, r.opt.steps);

  json report{{"command", "wave"},
              {"rescaled", rescaled},
              {"alpha", sol.alpha},
              {"alpha_limit", sol.alpha_limit},
              {"residual", sol.residual},
              {"max_condition", sol.max_condition},
              {"stages", sol.stages},
              {"kernel_id", json::parse(sol.kernel_id)},
              {"A_quantized", scw::area_gap(hfq, hgq)},
              {"A_model", scw::area_gap(hf, hg)},
              {"zf", sol.zf},
              {"zg", sol.zg},
              {"df", sol.df},
              {"dg", sol.dg}};
  ensure_out(r);
  emit_report(r, "wave.json", report);
  return 0;
}

int dispatch(const Resolved& r) {
  if (r.opt.command == "threshold") return cmd_threshold(r);
  if (r.opt.command == "potential") return cmd_potential(r);
  if (r.opt.command == "exit-chart") return cmd_exit_chart(r);
  if (r.opt.command == "simulate") return cmd_simulate(r);
  if (r.opt.command == "wave") return cmd_wave(r);
  throw scw::Error("BadConfig", "unknown command: " + r.opt.command);
}

int exit_code_for(const scw::Error& e) {
  if (e.code == "NoSaturation") return 2;
  static const char* usage[] = {"BadConfig",     "BadModel", "BadPolynomial",
                                "BadKernel",     "BadInput", "BadThresholdB",
                                "PriorUnsupported", "BadQuery", "BadConfigValue"};
  for (const char* u : usage)
    if (e.code == u) return 64;
  return 70;
}

void print_error(const std::string& code, const std::string& msg) {
  std::cerr << json{{"error", code}, {"message", msg}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatially coupled scalar recursions: thresholds, waves, exit charts"};
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--model", opt.model_path, "model spec JSON file")->required();
    sub->add_option("--kernel", opt.kernel_path, "kernel spec JSON file (default boxcar W=1)");
    sub->add_option("--delta", opt.delta, "grid pitch");
    sub->add_option("--window", opt.window, "active window length");
    sub->add_option("--termination", opt.termination, "none, left, or both");
    sub->add_option("--init", opt.init, "ones, step:<x>, or file:<path>");
    sub->add_option("--max-iters", opt.max_iters, "iteration cap");
    sub->add_option("--tol", opt.tol, "convergence tolerance");
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--jobs", opt.jobs, "worker pool size (COUPLED_WAVES_THREADS overrides)");
    sub->add_option("--quantize", opt.quantize, "jump count for quantized analytic inputs");
    sub->add_option("--grid", opt.grid, "chart grid size");
    sub->add_option("--steps", opt.steps, "continuation step count");
    sub->add_option("--seed", opt.seed, "seed recorded for Monte Carlo cross-checks");
  };
  for (const char* name : {"threshold", "simulate", "wave", "potential", "exit-chart"})
    add_common(app.add_subcommand(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::stringstream ss;
    ss << e.what();
    print_error("Usage", ss.str());
    return 64;
  }

  opt.command = app.get_subcommands().front()->get_name();

  try {
    return dispatch(resolve(opt));
  } catch (const scw::Error& e) {
    print_error(e.code, e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
    return 70;
  }
}
