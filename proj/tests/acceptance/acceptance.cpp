// Acceptance suite: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "telemovr/bessel.hpp"
#include "telemovr/cli.hpp"
#include "telemovr/errors.hpp"
#include "telemovr/estimation.hpp"
#include "telemovr/evalmetrics.hpp"
#include "telemovr/inference.hpp"
#include "telemovr/io.hpp"
#include "telemovr/synth.hpp"

using namespace telemovr;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Settings {
  double budget_s = 60.0;  // per-fit wall budget for criteria 5-7
  int num_seeds = 10;
  std::set<int> only;
  bool verbose = false;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ModelParams default_init(const Model& m, double kappa0 = 50.0) {
  return ModelParams::zeros(m.num_zones(), static_cast<int>(m.num_features()), static_cast<int>(m.num_towers()), kappa0);
}

// ---------------------------------------------------------------- criterion 1
Outcome exact_inference() {
  const auto t0 = Clock::now();
  Rng rng(1);
  int instances = 0;
  double worst = 0.0;
  for (; instances < 60; ++instances) {
    const auto in = oracle::random_instance(rng, 6, 6);
    const auto e = oracle::enumerate(*in.model, in.params, in.obs);
    const auto post = forward_backward(in.params, *in.model, in.obs, {true, false});
    auto diff = [&](double a, double b) {
      if (a == -INFINITY && b == -INFINITY) return;
      worst = std::max(worst, std::isfinite(a - b) ? std::abs(a - b) : INFINITY);
    };
    diff(post.loglik, e.loglik);
    const auto& g = *in.grid;
    for (int t = 0; t < in.obs.num_steps(); ++t)
      for (CellId c = 0; c < static_cast<CellId>(g.num_cells()); ++c) diff(post.log_marginals(t)[c], e.gamma[t][c]);
    for (int t = 0; t + 1 < in.obs.num_steps(); ++t)
      for (CellId i = 0; i < static_cast<CellId>(g.num_cells()); ++i)
        for (CellId j = 0; j < static_cast<CellId>(g.num_cells()); ++j) {
          const int k = g.neighbor_index(i, j);
          diff(k < 0 ? -INFINITY : post.log_pairwise(t)[g.pair_offset(i) + static_cast<std::size_t>(k)], e.xi[t][i][j]);
        }
    const auto path = viterbi(in.params, *in.model, in.obs);
    diff(oracle::joint(*in.model, in.params, in.obs, path), e.best);
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-10 && secs < 10.0, std::to_string(instances) + " instances, max |log diff| " + fmt("%.2e", worst) +
                                            " (tol 1e-10), " + fmt("%.2f", secs) + " s (limit 10 s)"};
}

// ---------------------------------------------------------------- criterion 2
Outcome gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(2);
  double worst = 0.0;
  int instances = 0;
  for (; instances < 25; ++instances) {
    auto in = oracle::random_instance(rng, 6, 6);
    if (instances % 4 == 0) in.params.kappa[0] = 0.0;
    const auto path = oracle::random_path(*in.grid, in.obs.num_steps(), rng);
    const auto g = grad_complete_loglik(in.params, *in.model, path, in.obs);
    const auto fd = oracle::finite_difference(in, path);
    auto cmp = [&](const std::vector<double>& a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
    };
    cmp(g.lambda, fd.lambda);
    cmp(g.mu, fd.mu);
    cmp(g.kappa, fd.kappa);
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 10.0, std::to_string(instances) + " instances, max rel err " + fmt("%.2e", worst) +
                                           " (tol 1e-4), " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- criterion 3
Outcome em_monotonicity(const Settings& s) {
  const auto t0 = Clock::now();
  int violations = 0, rows = 0;
  double worst_drop = 0.0;
  for (int seed = 0; seed < s.num_seeds; ++seed) {
    const auto sc = make_scenario(SynthSpec::desk_scale(static_cast<std::uint64_t>(seed)));
    FitConfig cfg;
    cfg.algo = Algorithm::em;
    cfg.max_iters = 25;
    cfg.init_params = default_init(*sc.model);
    cfg.monotonicity_tol = INFINITY;  // measured here rather than aborting
    const auto r = em_fit(cfg, *sc.model, sc.bearings);
    for (std::size_t i = 1; i < r.trace.records.size(); ++i, ++rows) {
      const double drop = r.trace.records[i - 1].objective - r.trace.records[i].objective;
      worst_drop = std::max(worst_drop, drop);
      if (drop > 1e-6) ++violations;
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 300.0, std::to_string(s.num_seeds) + " scenarios, " + std::to_string(rows) +
                                               " EM steps, largest decrease " + fmt("%.2e", worst_drop) + " (tol 1e-6), " +
                                               fmt("%.1f", secs) + " s (limit 300 s)"};
}

// ---------------------------------------------------------------- criterion 4
Outcome vonmises_round_trip() {
  const auto t0 = Clock::now();
  Rng rng(4);
  std::vector<WeightedResidual> r(100000);
  for (auto& x : r) x = {sample_von_mises(0.7, 15.0, rng), 1.0};
  const auto e = vonmises_mstep(r);
  std::vector<double> u(100000);
  for (auto& x : u) x = sample_von_mises(0.0, 0.0, rng);
  std::sort(u.begin(), u.end());
  double d = 0.0;
  const double n = static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double f = (u[i] + kPi) / kTwoPi;
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  const double ks_crit = 1.628 / std::sqrt(n);  // 1% level
  const double secs = seconds_since(t0);
  const bool ok = std::abs(e.mu - 0.7) < 0.02 && std::abs(e.kappa - 15.0) < 0.75 && d < ks_crit && secs < 10.0;
  return {ok, "mu_hat " + fmt("%.4f", e.mu) + " (0.7 +/- 0.02), kappa_hat " + fmt("%.3f", e.kappa) +
                  " (15 +/- 5%), KS D " + fmt("%.5f", d) + " < " + fmt("%.5f", ks_crit) + ", " + fmt("%.2f", secs) + " s"};
}

// ------------------------------------------------------------ criteria 5 and 6
struct DeskFits {
  std::vector<double> init_dist, sg_dist, em_dist;
  std::vector<double> sg_err, gauss_err;
  std::vector<long> sg_iters, em_iters;
  double seconds = 0.0;
};

DeskFits run_desk_fits(const Settings& s, bool with_gaussian) {
  DeskFits out;
  const auto t0 = Clock::now();
  for (int seed = 0; seed < s.num_seeds; ++seed) {
    const auto sc = make_scenario(SynthSpec::desk_scale(static_cast<std::uint64_t>(seed)));
    FitConfig cfg;
    cfg.max_time = s.budget_s;
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.trace_every = 1000000;
    cfg.init_params = default_init(*sc.model);
    out.init_dist.push_back(weight_distance(cfg.init_params.lambda, sc.truth.lambda));

    cfg.algo = Algorithm::sg;
    const auto sg = sg_fit(cfg, *sc.model, sc.bearings);
    out.sg_dist.push_back(weight_distance(sg.params.lambda, sc.truth.lambda));
    out.sg_iters.push_back(sg.trace.iterations);
    out.sg_err.push_back(location_error(viterbi(sg.params, *sc.model, sc.bearings), sc.path, *sc.grid));

    cfg.algo = Algorithm::em;
    const auto em = em_fit(cfg, *sc.model, sc.bearings);
    out.em_dist.push_back(weight_distance(em.params.lambda, sc.truth.lambda));
    out.em_iters.push_back(em.trace.iterations);

    if (with_gaussian) {
      auto fs = std::make_shared<const FeatureSet>(sc.grid, std::vector<FeatureDef>{FeatureDef::distance("distance", true)});
      const Model gauss(fs, sc.model->towers());
      FitConfig gc = cfg;
      gc.algo = Algorithm::sg;
      gc.init_params = default_init(gauss);
      const auto g = sg_fit(gc, gauss, sc.bearings);
      out.gauss_err.push_back(location_error(viterbi(g.params, gauss, sc.bearings), sc.path, *sc.grid));
    }
    if (s.verbose)
      std::cerr << "  seed " << seed << ": init " << out.init_dist.back() << " sg " << out.sg_dist.back() << " ("
                << out.sg_iters.back() << " it) em " << out.em_dist.back() << " (" << out.em_iters.back()
                << " it) sg err " << out.sg_err.back()
                << (with_gaussian ? " gauss err " + std::to_string(out.gauss_err.back()) : std::string()) << "\n";
  }
  out.seconds = seconds_since(t0);
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

Outcome weight_recovery(const Settings& s, const DeskFits& f) {
  int improved = 0;
  for (std::size_t i = 0; i < f.sg_dist.size(); ++i) improved += f.sg_dist[i] < f.init_dist[i];
  const double m_init = mean(f.init_dist), m_sg = mean(f.sg_dist), m_em = mean(f.em_dist);
  const int need = static_cast<int>(std::ceil(0.9 * s.num_seeds));
  const bool primary = improved >= need && m_sg < m_em;
  const bool fallback = m_sg <= 0.5 * m_init && m_em <= 0.5 * m_init;
  std::string d = "mean L2 distance init " + fmt("%.3f", m_init) + ", SG " + fmt("%.3f", m_sg) + ", EM " +
                  fmt("%.3f", m_em) + "; SG improved on " + std::to_string(improved) + "/" +
                  std::to_string(s.num_seeds) + "; ";
  if (primary) d += "SG < EM ordering holds";
  else d += "ordering inverted, fallback (both reduce >= 50%): SG -" + fmt("%.0f", 100 * (1 - m_sg / m_init)) +
            "%, EM -" + fmt("%.0f", 100 * (1 - m_em / m_init)) + "%";
  d += "; budget " + fmt("%.0f", s.budget_s) + " s/fit";
  return {primary || fallback, d};
}

Outcome rich_vs_gaussian(const DeskFits& f) {
  const double rich = mean(f.sg_err), gauss = mean(f.gauss_err);
  return {rich <= gauss, "mean Viterbi location error: K=5 " + fmt("%.1f", rich) + " m, distance-only " +
                             fmt("%.1f", gauss) + " m over " + std::to_string(f.sg_err.size()) + " seeds"};
}

// ---------------------------------------------------------------- criterion 7
Scenario grid_scenario(int side, int T, std::uint64_t seed) {
  SynthSpec s = SynthSpec::desk_scale(seed);
  s.grid.n_rows = side;
  s.grid.n_cols = side;
  s.num_steps = T;
  const double w = side * s.grid.cell_size;
  s.towers = {{1, {0.25 * w + 13, 0.25 * w + 7}},
              {2, {0.75 * w + 13, 0.25 * w + 7}},
              {3, {0.25 * w + 13, 0.75 * w + 7}},
              {4, {0.75 * w + 13, 0.75 * w + 7}}};
  return make_scenario(s);
}

Outcome throughput(const Settings& s) {
  const auto sc = grid_scenario(40, 500, 7);
  const auto init = default_init(*sc.model);
  const auto sg = iteration_cost_probe(Algorithm::sg, *sc.model, sc.bearings, init, s.budget_s, std::nullopt, 1000, 7);
  const auto em = iteration_cost_probe(Algorithm::em, *sc.model, sc.bearings, init, s.budget_s, std::nullopt, 1000, 7);
  const double ratio = static_cast<double>(sg.iterations) / std::max<long>(em.iterations, 1);
  return {ratio >= 5.0, "40x40 grid, T=500, " + fmt("%.0f", s.budget_s) + " s each: SG " + std::to_string(sg.iterations) +
                            " iterations, EM " + std::to_string(em.iterations) + " (ratio " + fmt("%.1f", ratio) +
                            ", need >= 5)"};
}

// ---------------------------------------------------------------- criterion 8
double loglog_slope(const std::vector<double>& q, const std::vector<double>& t) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    mx += std::log(q[i]);
    my += std::log(t[i]);
  }
  mx /= static_cast<double>(q.size());
  my /= static_cast<double>(q.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    sxy += (std::log(q[i]) - mx) * (std::log(t[i]) - my);
    sxx += (std::log(q[i]) - mx) * (std::log(q[i]) - mx);
  }
  return sxy / sxx;
}

Outcome complexity_scaling(const Settings& s) {
  const auto t0 = Clock::now();
  std::vector<double> q, em_t, sg_t;
  std::string per;
  for (int side : {10, 20, 40}) {
    const auto sc = grid_scenario(side, 200, 8);
    const auto init = default_init(*sc.model);
    const auto em = iteration_cost_probe(Algorithm::em, *sc.model, sc.bearings, init, 120.0, 6, 1000, 8);
    const auto sg = iteration_cost_probe(Algorithm::sg, *sc.model, sc.bearings, init, 120.0, 300, 1000, 8);
    q.push_back(static_cast<double>(sc.grid->num_cells()));
    em_t.push_back(em.seconds_per_iteration());
    sg_t.push_back(sg.seconds_per_iteration());
    per += " Q=" + std::to_string(sc.grid->num_cells()) + ": EM " + fmt("%.4f", em_t.back()) + " s/it, SG " +
           fmt("%.5f", sg_t.back()) + " s/it, mean |N| " +
           fmt("%.1f", static_cast<double>(sc.grid->num_pairs()) / static_cast<double>(sc.grid->num_cells())) + ";";
  }
  const double em_slope = loglog_slope(q, em_t), sg_slope = loglog_slope(q, sg_t);
  (void)s;
  const bool ok = em_slope >= 1.3 && em_slope <= 2.3 && sg_slope <= 1.5 && seconds_since(t0) < 600;
  return {ok, "EM slope " + fmt("%.2f", em_slope) + " (need [1.3, 2.3]), SG slope " + fmt("%.2f", sg_slope) +
                  " (need <= 1.5);" + per};
}

// ---------------------------------------------------------------- criterion 9
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::read_text(e.path());
  return files;
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / ("telemovr_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  fs::create_directories(base);
  auto write = [&](const std::string& name, const std::string& text) { std::ofstream(base / name) << text; };
  write("synth.json", R"({"preset": "desk", "seed": 21, "T": 80, "dropout": 0.05})");
  write("fit_em.json", R"({"scenario": "scen", "fit": {"algo": "em", "max_iters": 4}})");
  write("fit_sg.json", R"({"scenario": "scen", "fit": {"algo": "sg", "max_iters": 40, "num_burn": 200, "trace_every": 5}})");
  write("decode.json", R"({"scenario": "scen", "params": "scen/true_params.json", "marginals": true})");
  write("decode_m.json", R"({"scenario": "scen", "params": "scen/true_params.json", "mode": "marginal"})");
  write("compare.json", R"({"scenario": "scen", "configs": [
      {"label": "em", "fit": {"algo": "em", "max_iters": 2}},
      {"label": "sg", "fit": {"algo": "sg", "max_iters": 20, "num_burn": 100}},
      {"label": "gauss", "features": {"kind": "distance"}, "fit": {"algo": "sg", "max_iters": 20, "num_burn": 100}}]})");

  std::ostringstream sink;
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"simulate", {"simulate", "--spec", "synth.json"}},
      {"simulate --seeds", {"simulate", "--spec", "synth.json", "--seeds", "3..4"}},
      {"fit em", {"fit", "--spec", "fit_em.json"}},
      {"fit sg --seeds", {"fit", "--spec", "fit_sg.json", "--seeds", "0..3"}},
      {"fit --algo em", {"fit", "--spec", "fit_sg.json", "--algo", "em"}},
      {"decode", {"decode", "--spec", "decode.json"}},
      {"decode marginal", {"decode", "--spec", "decode_m.json"}},
      {"eval", {"eval", "--spec", "eval.json"}},
      {"compare", {"compare", "--spec", "compare.json", "--seeds", "0..1"}},
  };
  // The scenario for later commands comes from the first simulate run.
  {
    std::vector<std::string> args{"simulate", "--spec", (base / "synth.json").string(), "--out", (base / "scen").string()};
    if (cli::run(args, sink, sink) != 0) return {false, "simulate failed: " + sink.str()};
  }
  std::vector<std::string> mismatched;
  int compared = 0;
  for (const auto& [name, cmd] : commands) {
    std::map<std::string, std::string> runs[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = base / ("out_" + std::to_string(compared) + "_" + std::to_string(rep));
      if (name == "eval") write("eval.json", R"({"scenario": "scen", "path": "out_5_)" + std::to_string(rep) + R"(/path.csv"})");
      std::vector<std::string> args = cmd;
      args[2] = (base / args[2]).string();
      args.push_back("--out");
      args.push_back(out.string());
      if (cli::run(args, sink, sink) != 0) return {false, name + " failed: " + sink.str()};
      runs[rep] = snapshot(out);
    }
    if (runs[0] != runs[1] || runs[0].empty()) mismatched.push_back(name);
    ++compared;
  }
  fs::remove_all(base);
  std::string d = std::to_string(compared) + " command variants run twice; ";
  if (mismatched.empty()) d += "all outputs byte-identical";
  else {
    d += "differences in:";
    for (const auto& m : mismatched) d += " " + m;
  }
  return {mismatched.empty(), d};
}

// --------------------------------------------------------------- criterion 10
Outcome high_snr(const Settings& s) {
  double worst = 0.0;
  int ok = 0;
  for (int seed = 0; seed < s.num_seeds; ++seed) {
    SynthSpec spec = SynthSpec::desk_scale(static_cast<std::uint64_t>(seed));
    spec.towers = {{1, {500, 500}}, {2, {1500, 500}}, {3, {1000, 1500}}};
    spec.true_mu.assign(3, 0.0);
    spec.true_kappa.assign(3, 200.0);
    const auto sc = make_scenario(spec);
    const double err = location_error(viterbi(sc.truth, *sc.model, sc.bearings), sc.path, *sc.grid);
    worst = std::max(worst, err);
    ok += err < spec.grid.cell_size;
  }
  return {ok == s.num_seeds, "kappa=200, 3 towers: " + std::to_string(ok) + "/" + std::to_string(s.num_seeds) +
                                 " seeds below 100 m, worst mean error " + fmt("%.1f", worst) + " m"};
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  std::vector<int> only;
  CLI::App app{"telemovr acceptance suite"};
  app.add_option("--budget", s.budget_s, "wall-clock budget per fit in seconds (criteria 5-7)");
  app.add_option("--seeds", s.num_seeds, "number of synthetic seeds");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_flag("--verbose", s.verbose, "per-seed diagnostics on stderr");
  CLI11_PARSE(app, argc, argv);
  s.only.insert(only.begin(), only.end());
  auto want = [&](int c) { return s.only.empty() || s.only.count(c); };

  int failed = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::cout << "criterion " << id << " [" << (o.pass ? "PASS" : "FAIL") << "] " << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  };
  auto guarded = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    if (!want(id)) return;
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, "exact-inference oracle equivalence", exact_inference);
  guarded(2, "gradient correctness", gradient_check);
  guarded(3, "EM monotonicity", [&] { return em_monotonicity(s); });
  guarded(4, "von Mises round trip", vonmises_round_trip);
  if (want(5) || want(6)) {
    try {
      const DeskFits f = run_desk_fits(s, want(6));
      if (want(5)) report(5, "weight recovery", weight_recovery(s, f));
      if (want(6)) report(6, "rich features vs distance-only", rich_vs_gaussian(f));
    } catch (const std::exception& e) {
      if (want(5)) report(5, "weight recovery", {false, std::string("exception: ") + e.what()});
      if (want(6)) report(6, "rich features vs distance-only", {false, std::string("exception: ") + e.what()});
    }
  }
  guarded(7, "throughput ordering", [&] { return throughput(s); });
  guarded(8, "complexity scaling", [&] { return complexity_scaling(s); });
  guarded(9, "determinism", determinism);
  guarded(10, "high-SNR decoding", [&] { return high_snr(s); });
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
