#include "iqccert/cli.hpp"

#include "iqccert/benchmarks.hpp"
#include "iqccert/bundle.hpp"
#include "iqccert/certifier.hpp"
#include "iqccert/config_io.hpp"
#include "iqccert/learner.hpp"
#include "iqccert/policy.hpp"
#include "iqccert/simulator.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

namespace iqccert::cli {

namespace fs = std::filesystem;
using config::Json;

namespace {

struct NumericalVerdict : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Context {
  fs::path workdir = ".";
  std::vector<std::string> argv;
  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : workdir / path;
  }
};

void apply_thread_cap() {
  if (const char* env = std::getenv("IQC_CERT_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) throw ValidationError("IQC_CERT_THREADS must be a positive integer");
    omp_set_num_threads(static_cast<int>(n));
  }
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw ValidationError("cannot write '" + p.string() + "'");
  return out;
}

void emit(const Json& j, const Context& ctx, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    auto f = open_out(ctx.resolve(out));
    f << j.dump(2) << "\n";
  }
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// ---- shared loading ---------------------------------------------------------

struct Target {
  CertSetup setup;
  BoundsFactory factory;
  std::map<std::string, std::string> inputs;  // for hashing
  const Benchmark* bm = nullptr;
  Benchmark storage;
};

void load_target(Target& t, const Context& ctx, const std::string& preset_name, const std::string& plant, bool static_iqc,
                 const std::string& pattern_path, double eps) {
  if (preset_name.empty() == plant.empty()) throw ValidationError("give exactly one of --preset or --plant");
  if (!preset_name.empty()) {
    t.storage = preset(preset_name);
    t.bm = &t.storage;
    t.setup = t.storage.cert_setup(!static_iqc);
    t.factory = t.storage.bounds_factory({}, eps);
    t.inputs["preset"] = preset_name + (static_iqc ? ":static" : ":dynamic");
  } else {
    const fs::path p = ctx.resolve(plant);
    t.inputs["plant"] = config::read_text(p);
    t.setup = config::plant_from_json(config::load_json(p));
    t.factory.n_a = t.setup.plant.n_a();
    t.factory.n_s = t.setup.plant.n_s();
    t.factory.mask = Matrix::Ones(t.factory.n_a, t.factory.n_s);
    t.factory.eps = eps;
  }
  if (!pattern_path.empty()) {
    const fs::path p = ctx.resolve(pattern_path);
    t.inputs["pattern"] = config::read_text(p);
    const auto pf = config::pattern_from_json(config::load_json(p));
    t.factory.pattern = pf.pattern;
  }
}

PolicyNet load_policy(const Context& ctx, const std::string& path, const Benchmark& bm,
                      std::map<std::string, std::string>* inputs) {
  if (path.empty()) {
    // Zero residual policy: the nominal loop alone.
    Layer l;
    l.W = Matrix::Zero(bm.plant.n_a(), bm.plant.n_s());
    l.mask = bm.obs_mask;
    l.b = Vector::Zero(bm.plant.n_a());
    return PolicyNet({l}, true);
  }
  const fs::path p = ctx.resolve(path);
  if (inputs) (*inputs)["controller"] = config::read_text(p);
  PolicyNet net = config::policy_from_json(config::load_json(p));
  if (net.n_in() != bm.plant.n_s() || net.n_out() != bm.plant.n_a())
    throw ValidationError("controller dimensions do not match the preset");
  return net;
}

// ---- subcommands --------------------------------------------------------------

struct CertifyArgs {
  std::string preset, plant, bounds, mode, pattern, out;
  double l = -1.0, eps = 0.1, gamma_max = 1e4, gamma_min = 1e-2, gamma = -1.0;
  bool static_iqc = false;
};

int cmd_certify(const CertifyArgs& a, const Context& ctx) {
  Target t;
  load_target(t, ctx, a.preset, a.plant, a.static_iqc, a.pattern, a.eps);
  GradientBoundSet bounds;
  if (!a.bounds.empty()) {
    const fs::path p = ctx.resolve(a.bounds);
    t.inputs["bounds"] = config::read_text(p);
    bounds = config::bounds_from_json(config::load_json(p), t.setup.plant.n_a(), t.setup.plant.n_s());
  } else {
    if (a.mode.empty() || a.l < 0.0) throw ValidationError("give --bounds, or --mode together with --l");
    bounds = t.factory.make(parse_mode(a.mode), a.l);
  }
  const Assembler asmb = t.setup.assembler(bounds);
  CertifierOptions opt;
  Certificate cert;
  if (a.gamma > 0.0) {
    cert = feasibility(asmb(a.gamma), opt.sdp);
  } else {
    cert = bisect_gamma(asmb, a.gamma_min, a.gamma_max, opt.gamma_tol, opt);
  }
  Json j = config::to_json(cert);
  j["config_hash"] = bundle::tree_hash(t.inputs);
  emit(j, ctx, a.out);
  if (cert.verdict == sdp::Verdict::NumericalFailure) throw NumericalVerdict("solver reported a numerical failure");
  return kExitOk;
}

struct SweepArgs {
  std::string preset, plant, grid = "0.1:0.1:3.0", pattern, out_dir = "sweep";
  std::vector<std::string> modes = {"l2"};
  double eps = 0.1;
  bool static_iqc = false, bisect = false;
};

int cmd_sweep(const SweepArgs& a, const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  Target t;
  load_target(t, ctx, a.preset, a.plant, a.static_iqc, a.pattern, a.eps);
  const std::vector<double> grid = parse_grid(a.grid);
  if (grid.empty()) throw ValidationError("empty grid");
  t.inputs["grid"] = a.grid;
  const fs::path dir = ctx.resolve(a.out_dir);
  fs::create_directories(dir);
  CertifierOptions opt;
  opt.bisect = a.bisect;
  bundle::Manifest man;
  man.command = "sweep";
  man.argv = ctx.argv;
  Json summary = Json::object();
  bool numerical = false;
  for (const auto& m : a.modes) {
    const ConstraintMode mode = parse_mode(m);
    t.inputs["mode:" + to_string(mode)] = to_string(mode);
    const MarginCurve curve = sweep_margin(t.setup, t.factory, mode, grid, opt);
    const std::string name = "sweep_" + to_string(mode) + ".csv";
    auto out = open_out(dir / name);
    out << "l,feasible,gamma,solve_ms\n";
    for (const auto& lv : curve.levels) {
      out << fmt(lv.l) << "," << (lv.feasible ? 1 : 0) << "," << (lv.feasible ? fmt(lv.gamma) : "") << ","
          << fmt(lv.solve_ms) << "\n";
      numerical = numerical || lv.verdict == sdp::Verdict::NumericalFailure;
    }
    man.outputs.push_back(name);
    summary[to_string(mode)] = Json{{"max_certified", curve.max_certified()}, {"monotone", curve.monotone()}};
  }
  man.inputs = t.inputs;
  man.wall_ms = elapsed_ms(t0);
  bundle::write_manifest(dir, man);
  summary["config_hash"] = man.config_hash();
  std::cout << summary.dump(2) << "\n";
  if (numerical) throw NumericalVerdict("at least one level ended in a numerical failure");
  return kExitOk;
}

struct SimArgs {
  std::string preset, controller, out = "trajectory.csv";
  unsigned long long seed = 7;
  double h = 1e-3, T = 20.0, x0_std = 0.1, noise_std = 0.0;
};

int cmd_simulate(const SimArgs& a, const Context& ctx) {
  const Benchmark bm = preset(a.preset);
  const PolicyNet net = load_policy(ctx, a.controller, bm, nullptr);
  const Dynamics dyn = bm.dynamics();
  std::mt19937_64 rng(a.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector x0(dyn.n_s());
  for (int j = 0; j < dyn.n_s(); ++j) x0(j) = a.x0_std * gauss(rng);
  const int K = static_cast<int>(std::llround(a.T / a.h)) + 1;
  const Matrix e = a.noise_std > 0.0 ? lowpass_noise(dyn.n_a(), K, a.h, a.noise_std, 5.0, a.seed + 1) : Matrix();
  const Trajectory tr = integrate(dyn, [&](const Vector& y) { return net.forward(y); }, e, x0, a.T, a.h);
  auto out = open_out(ctx.resolve(a.out));
  out << "t";
  for (int j = 0; j < dyn.n_s(); ++j) out << ",x" << j + 1;
  for (int i = 0; i < dyn.n_a(); ++i) out << ",u" << i + 1;
  for (int i = 0; i < dyn.n_a(); ++i) out << ",e" << i + 1;
  out << ",r\n";
  for (int k = 0; k < tr.steps(); ++k) {
    out << fmt(tr.times(k));
    for (int j = 0; j < dyn.n_s(); ++j) out << "," << fmt(tr.x(k, j));
    for (int i = 0; i < dyn.n_a(); ++i) out << "," << fmt(tr.u(k, i));
    for (int i = 0; i < dyn.n_a(); ++i) out << "," << fmt(tr.e(k, i));
    out << "," << fmt(tr.r(k)) << "\n";
  }
  if (tr.diverged) std::cerr << "warning: trajectory diverged at t = " << tr.times(tr.steps() - 1) << "\n";
  return kExitOk;
}

struct GainArgs {
  std::string preset, controller, mode = "sparsity", out;
  int n_excitations = 10;
  unsigned long long seed = 1;
  double h = 1e-3, T = 20.0, l = -1.0, noise_std = 0.05, cutoff = 5.0;
};

int cmd_gain(const GainArgs& a, const Context& ctx) {
  const Benchmark bm = preset(a.preset);
  std::map<std::string, std::string> inputs{{"preset", a.preset}};
  const PolicyNet net = load_policy(ctx, a.controller, bm, &inputs);
  const ConstraintMode mode = parse_mode(a.mode);
  if (mode == ConstraintMode::Nonhomogeneous) throw ValidationError("gain: use l2 or sparsity bounds");
  if (a.n_excitations < 1) throw ValidationError("gain: --n-excitations must be >= 1");
  const double l = a.l > 0.0 ? a.l : std::max(lipschitz_upper(net), 1e-6);
  const int K = static_cast<int>(std::llround(a.T / a.h)) + 1;
  std::vector<Matrix> exc;
  for (int k = 0; k < a.n_excitations; ++k)
    exc.push_back(lowpass_noise(bm.plant.n_a(), K, a.h, a.noise_std, a.cutoff, a.seed + static_cast<unsigned>(k)));
  const GainEstimate est =
      empirical_l2_gain(bm.dynamics(), [&](const Vector& y) { return net.forward(y); }, exc, a.T, a.h);
  const CertSetup setup = bm.cert_setup(true);
  const Certificate cert = bisect_gamma(setup.assembler(bm.bounds_factory().make(mode, l)), 1e-2, 1e4, 0.05);
  Json j{{"empirical_gain", est.gain}, {"l", l}, {"mode", to_string(mode)}, {"verdict", sdp::to_string(cert.verdict)},
         {"skipped", est.skipped}, {"diverged", est.any_diverged}, {"config_hash", bundle::tree_hash(inputs)}};
  j["certified_gamma"] = cert.feasible ? Json(cert.gamma) : Json(nullptr);
  emit(j, ctx, a.out);
  if (cert.verdict == sdp::Verdict::NumericalFailure) throw NumericalVerdict("solver reported a numerical failure");
  return kExitOk;
}

struct TrainArgs {
  std::string preset, mode = "ht", out_dir = "train", hidden;
  double lcert = 1.0, T = 20.0, h = 1e-3, delta_kl = 0.01, x0_std = 0.1;
  double w1 = -1.0, w2 = -1.0;
  int iters = 1000, rollouts = 4, control_every = 10, checkpoint_every = 50;
  unsigned long long seed = 3;
};

std::vector<int> parse_hidden(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t pos = 0;
      const int v = std::stoi(tok, &pos);
      if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("--hidden expects positive integers separated by commas");
    }
  }
  return out;
}

int cmd_train(const TrainArgs& a, const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const Benchmark bm = preset(a.preset);
  TrainConfig cfg;
  cfg.mode = parse_regulation(a.mode);
  cfg.l_cert = a.lcert;
  cfg.iterations = a.iters;
  cfg.seed = a.seed;
  cfg.rollouts = a.rollouts;
  cfg.horizon = a.T;
  cfg.h = a.h;
  cfg.control_every = a.control_every;
  cfg.delta_kl = a.delta_kl;
  cfg.x0_std = a.x0_std;
  cfg.w1 = a.w1;
  cfg.w2 = a.w2;
  cfg.hidden = parse_hidden(a.hidden);
  cfg.validate();
  if (a.checkpoint_every < 1) throw ValidationError("--checkpoint-every must be >= 1");

  const fs::path dir = ctx.resolve(a.out_dir);
  fs::create_directories(dir / "checkpoints");
  bundle::Manifest man;
  man.command = "train";
  man.argv = ctx.argv;
  man.seed = a.seed;
  std::ostringstream cfg_text;
  cfg_text << a.preset << " " << a.mode << " " << fmt(a.lcert) << " " << a.iters << " " << a.rollouts << " " << fmt(a.T)
           << " " << fmt(a.h) << " " << a.control_every << " " << fmt(a.delta_kl) << " " << fmt(a.x0_std) << " "
           << fmt(a.w1) << " " << fmt(a.w2) << " " << a.hidden << " " << a.seed;
  man.inputs["train_config"] = cfg_text.str();

  auto curve = open_out(dir / "learning_curve.csv");
  curve << "iter,mean_reward,lipschitz,kl,w2,accepted,diverged\n";
  man.outputs.push_back("learning_curve.csv");
  const TrainResult res = train(bm.dynamics(), bm.obs_mask, cfg, [&](const IterationRecord& r, const PolicyNet& net) {
    curve << r.iter << "," << fmt(r.mean_reward) << "," << fmt(r.lipschitz) << "," << fmt(r.kl) << "," << fmt(r.w2) << ","
          << (r.accepted ? 1 : 0) << "," << (r.diverged ? 1 : 0) << "\n";
    if (r.iter % a.checkpoint_every == 0) {
      std::ostringstream name;
      name << "checkpoints/policy_" << std::setw(5) << std::setfill('0') << r.iter << ".json";
      config::save_json(dir / name.str(), config::to_json(net));
      man.outputs.push_back(name.str());
    }
  });
  curve.close();
  config::save_json(dir / "policy.json", config::to_json(res.net));
  man.outputs.push_back("policy.json");
  if (!res.pattern.empty()) {
    config::PatternFile pf{res.pattern, 0.1, cfg.l_cert};
    config::save_json(dir / "pattern.json", config::to_json(pf));
    man.outputs.push_back("pattern.json");
  }
  man.wall_ms = elapsed_ms(t0);
  bundle::write_manifest(dir, man);
  Json summary{{"iterations", cfg.iterations},
               {"final_lipschitz", lipschitz_upper(res.net)},
               {"ht_violations", res.ht_violations},
               {"diverged_iterations", res.diverged_iterations},
               {"config_hash", man.config_hash()}};
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

struct ReportArgs {
  std::vector<std::string> bundles;
  std::string out = "margin_curves.csv";
};

int cmd_report(const ReportArgs& a, const Context& ctx) {
  if (a.bundles.empty()) throw ValidationError("report: give at least one --bundle");
  auto out = open_out(ctx.resolve(a.out));
  out << "mode,l,feasible,gamma\n";
  std::vector<std::pair<std::string, double>> summary;
  for (const auto& b : a.bundles) {
    const fs::path dir = ctx.resolve(b);
    const Json man = bundle::read_manifest(dir);
    if (man.value("command", "") != "sweep") throw ValidationError("bundle '" + b + "' is not a sweep bundle");
    const auto outputs = man.value("outputs", std::vector<std::string>{});
    if (outputs.empty()) throw ValidationError("bundle '" + b + "' lists no outputs");
    for (const auto& name : outputs) {
      const fs::path csv = dir / name;
      if (!fs::exists(csv)) throw ValidationError("bundle '" + b + "' is incomplete: missing " + name);
      const std::string mode = name.substr(6, name.size() - 10);  // sweep_<mode>.csv
      std::ifstream in(csv);
      std::string line;
      std::getline(in, line);
      if (line != "l,feasible,gamma,solve_ms") throw ValidationError(name + ": unexpected header");
      double max_l = 0.0;
      bool prefix = true;
      int rows = 0;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string l, f, g;
        std::getline(ss, l, ',');
        std::getline(ss, f, ',');
        std::getline(ss, g, ',');
        out << mode << "," << l << "," << f << "," << g << "\n";
        const bool feas = f == "1";
        if (prefix && feas) max_l = std::stod(l);
        prefix = prefix && feas;
        ++rows;
      }
      if (rows == 0) throw ValidationError(name + ": no rows");
      summary.emplace_back(mode, max_l);
    }
  }
  std::cout << std::left << std::setw(16) << "mode"
            << "max_certified_l\n";
  for (const auto& [m, l] : summary) std::cout << std::setw(16) << m << fmt(l) << "\n";
  return kExitOk;
}

void print_error(const std::string& kind, const std::string& msg) {
  std::cerr << Json{{"error", {{"kind", kind}, {"message", msg}}}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

int run(const std::vector<std::string>& args_in) {
  Context ctx;
  ctx.argv = args_in;
  std::string workdir = ".";
  CLI::App app{"Stability certificates for gradient-bounded controllers"};
  app.set_help_flag("--help", "Print help and exit");
  app.require_subcommand(1);
  app.add_option("--workdir", workdir, "Base directory for relative paths");

  CertifyArgs ca;
  auto* certify = app.add_subcommand("certify", "Certify one bound set (JSON certificate)");
  certify->add_option("--preset", ca.preset, "Benchmark preset (flight4, power_swing)");
  certify->add_option("--plant", ca.plant, "Plant JSON");
  certify->add_option("--bounds", ca.bounds, "Gradient bounds JSON");
  certify->add_option("--mode", ca.mode, "l2, sparsity or nonhom (with --l)");
  certify->add_option("--l", ca.l, "Bound level");
  certify->add_option("--pattern", ca.pattern, "Sign pattern JSON for nonhom");
  certify->add_option("--eps", ca.eps, "One-sided margin");
  certify->add_option("--gamma-max", ca.gamma_max, "Upper end of the gamma search");
  certify->add_option("--gamma-min", ca.gamma_min, "Lower end of the gamma search");
  certify->add_option("--gamma", ca.gamma, "Check a single gamma instead of bisecting");
  certify->add_flag("--static", ca.static_iqc, "Static sector multipliers instead of dynamic ones");
  certify->add_option("--out", ca.out, "Write the certificate here instead of stdout");

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "Margin curve over a grid of levels");
  sweep->add_option("--preset", sa.preset, "Benchmark preset");
  sweep->add_option("--plant", sa.plant, "Plant JSON");
  sweep->add_option("--mode", sa.modes, "l2, sparsity, nonhom (repeatable)");
  sweep->add_option("--grid", sa.grid, "a:step:b or a comma list");
  sweep->add_option("--pattern", sa.pattern, "Sign pattern JSON for nonhom");
  sweep->add_option("--eps", sa.eps, "One-sided margin");
  sweep->add_option("--out-dir", sa.out_dir, "Bundle directory");
  sweep->add_flag("--static", sa.static_iqc, "Static sector multipliers");
  sweep->add_flag("--bisect", sa.bisect, "Refine gamma at feasible levels");

  SimArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Closed-loop trajectory CSV");
  simulate->add_option("--preset", sim.preset, "Benchmark preset")->required();
  simulate->add_option("--controller", sim.controller, "Policy JSON (default: zero residual policy)");
  simulate->add_option("--seed", sim.seed, "Seed for x0 and noise");
  simulate->add_option("--h", sim.h, "Step size");
  simulate->add_option("--T", sim.T, "Horizon (s)");
  simulate->add_option("--x0-std", sim.x0_std, "Initial-state spread");
  simulate->add_option("--noise-std", sim.noise_std, "Low-pass input noise level");
  simulate->add_option("--out", sim.out, "CSV path");

  GainArgs ga;
  auto* gain = app.add_subcommand("gain", "Empirical L2 gain against the certified gamma");
  gain->add_option("--preset", ga.preset, "Benchmark preset")->required();
  gain->add_option("--controller", ga.controller, "Policy JSON");
  gain->add_option("--mode", ga.mode, "Bounds used for the certificate (l2 or sparsity)");
  gain->add_option("--l", ga.l, "Bound level (default: Lipschitz bound of the controller)");
  gain->add_option("--n-excitations", ga.n_excitations, "Number of excitations");
  gain->add_option("--seed", ga.seed, "First excitation seed");
  gain->add_option("--h", ga.h, "Step size");
  gain->add_option("--T", ga.T, "Horizon (s)");
  gain->add_option("--noise-std", ga.noise_std, "Excitation level");
  gain->add_option("--out", ga.out, "Write JSON here instead of stdout");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Policy training with gradient regulation");
  trn->add_option("--preset", ta.preset, "Benchmark preset")->required();
  trn->add_option("--mode", ta.mode, "none, soft_penalty or ht");
  trn->add_option("--lcert", ta.lcert, "Certified Lipschitz level");
  trn->add_option("--iters", ta.iters, "Iterations");
  trn->add_option("--seed", ta.seed, "Seed");
  trn->add_option("--rollouts", ta.rollouts, "Rollouts per iteration");
  trn->add_option("--T", ta.T, "Episode horizon (s)");
  trn->add_option("--h", ta.h, "Step size");
  trn->add_option("--control-every", ta.control_every, "Integrator steps per control decision");
  trn->add_option("--delta-kl", ta.delta_kl, "KL radius");
  trn->add_option("--x0-std", ta.x0_std, "Initial-state spread");
  trn->add_option("--w1", ta.w1, "Exploration-consistency weight (negative: automatic)");
  trn->add_option("--w2", ta.w2, "Smoothness weight in soft_penalty mode (negative: automatic)");
  trn->add_option("--hidden", ta.hidden, "Hidden widths per agent, comma separated (empty: linear)");
  trn->add_option("--checkpoint-every", ta.checkpoint_every, "Checkpoint period");
  trn->add_option("--out-dir", ta.out_dir, "Bundle directory");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Tidy margin curves and summary from sweep bundles");
  report->add_option("--bundle", ra.bundles, "Sweep bundle directory (repeatable)")->required();
  report->add_option("--out", ra.out, "Output CSV");

  std::vector<std::string> rev(args_in.rbegin(), args_in.rend() - (args_in.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return kExitValidation;
  }

  try {
    apply_thread_cap();
    ctx.workdir = workdir;
    if (!fs::is_directory(ctx.workdir)) throw ValidationError("--workdir '" + workdir + "' is not a directory");
    if (certify->parsed()) return cmd_certify(ca, ctx);
    if (sweep->parsed()) return cmd_sweep(sa, ctx);
    if (simulate->parsed()) return cmd_simulate(sim, ctx);
    if (gain->parsed()) return cmd_gain(ga, ctx);
    if (trn->parsed()) return cmd_train(ta, ctx);
    if (report->parsed()) return cmd_report(ra, ctx);
  } catch (const ValidationError& e) {
    print_error("validation", e.what());
    return kExitValidation;
  } catch (const NumericalVerdict& e) {
    print_error("numerical", e.what());
    return kExitNumerical;
  } catch (const NumericalError& e) {
    print_error("numerical", e.what());
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    print_error("validation", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return kExitNumerical;
  }
  return kExitValidation;
}

}  // namespace iqccert::cli
