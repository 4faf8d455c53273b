#include "telemovr/cli.hpp"

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include "CLI11.hpp"
#include "telemovr/errors.hpp"
#include "telemovr/estimation.hpp"
#include "telemovr/evalmetrics.hpp"
#include "telemovr/inference.hpp"
#include "telemovr/io.hpp"
#include "telemovr/synth.hpp"

namespace telemovr::cli {
namespace {

namespace fs = std::filesystem;
using io::Json;

struct Options {
  std::string command;
  fs::path spec;
  std::optional<fs::path> out;
  std::optional<std::string> seeds;
  std::optional<std::string> algo;
};

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  if (!j.is_object()) throw IoError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw IoError(std::string(what) + ": unknown field '" + key + "'");
}

fs::path spec_dir(const Options& o) { return o.spec.has_parent_path() ? o.spec.parent_path() : fs::path("."); }

fs::path resolve(const fs::path& base, const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) throw IoError(std::string("spec: missing string field '") + key + "'");
  fs::path p(j.at(key).get<std::string>());
  return p.is_absolute() ? p : base / p;
}

fs::path output_dir(const Options& o, const Json& spec) {
  if (o.out) return *o.out;
  if (spec.contains("out") && spec.at("out").is_string()) return resolve(spec_dir(o), spec, "out");
  throw IoError("no output directory: pass --out or set \"out\" in the spec");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

// Runs fn(i) for i in [0, n) on a small worker pool; rethrows the first
// failure after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        std::size_t i;
        {
          std::lock_guard lock(mu);
          if (next >= n || failure) return;
          i = next++;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Feature override for a fit: "scenario" keeps the scenario features,
// {"kind": "distance", "normalize": bool} swaps in the single distance
// feature, {"file": path} loads another feature config.
std::shared_ptr<const Model> model_for(const io::ScenarioFiles& sc, const Json& spec, const fs::path& base) {
  if (!spec.contains("features") || spec.at("features") == "scenario") return sc.model;
  const Json& f = spec.at("features");
  std::shared_ptr<const FeatureSet> fs;
  if (f.is_object() && f.value("kind", "") == "distance") {
    fs = std::make_shared<const FeatureSet>(sc.grid, std::vector<FeatureDef>{FeatureDef::distance("distance", f.value("normalize", true))});
  } else if (f.is_object() && f.contains("file")) {
    fs = io::load_feature_set(resolve(base, f, "file"), sc.grid);
  } else {
    throw IoError("spec: features must be \"scenario\", {\"kind\": \"distance\"} or {\"file\": path}");
  }
  return std::make_shared<const Model>(fs, sc.model->towers());
}

ModelParams default_init(const Model& model, double kappa0 = 50.0) {
  return ModelParams::zeros(model.num_zones(), static_cast<int>(model.num_features()), static_cast<int>(model.num_towers()), kappa0);
}

std::vector<CellId> decode(const ModelParams& params, const Model& model, const BearingSeries& obs, const std::string& mode) {
  if (mode == "viterbi") return viterbi(params, model, obs);
  if (mode == "marginal") return marginal_mode_path(forward_backward(params, model, obs, {false, false}));
  throw IoError("spec: decode mode must be viterbi or marginal");
}

// Location error against the true path, or against GPS fixes at matching
// steps when only those exist. NaN when neither is available.
double path_error(const io::ScenarioFiles& sc, std::span<const CellId> path) {
  if (sc.true_path) return location_error(path, *sc.true_path, *sc.grid);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& fix : sc.gps) {
    if (fix.t < 0 || static_cast<std::size_t>(fix.t) >= path.size()) continue;
    sum += distance(sc.grid->center(path[static_cast<std::size_t>(fix.t)]), fix.p);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

EvalReport evaluate(const io::ScenarioFiles& sc, const Model& model, const ModelParams& params,
                    std::span<const CellId> path, std::string label) {
  EvalReport r;
  r.label = std::move(label);
  r.mean_location_error = path_error(sc, path);
  if (sc.truth && sc.truth->lambda.size() == params.lambda.size())
    r.weight_l2_distance = weight_distance(params.lambda, sc.truth->lambda);
  r.observed_loglik = forward_backward(params, model, sc.bearings, {false, false}).loglik;
  return r;
}

std::vector<long> seeds_for(const Options& o, const Json& spec, long fallback) {
  if (o.seeds) return parse_seed_range(*o.seeds);
  if (spec.contains("seeds")) {
    const Json& s = spec.at("seeds");
    if (s.is_string()) return parse_seed_range(s.get<std::string>());
    if (s.is_array()) return s.get<std::vector<long>>();
  }
  return {fallback};
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const Json j = io::read_json(o.spec);
  const SynthSpec base = io::synth_spec_from_json(j, spec_dir(o));
  base.validate();
  const fs::path dir = output_dir(o, j);
  const auto seeds = o.seeds ? parse_seed_range(*o.seeds) : std::vector<long>{static_cast<long>(base.seed)};
  const bool nested = o.seeds.has_value();
  std::vector<std::string> lines(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    SynthSpec spec = base;
    spec.seed = static_cast<std::uint64_t>(seeds[i]);
    const Scenario sc = make_scenario(spec);
    const fs::path target = nested ? dir / ("seed_" + std::to_string(seeds[i])) : dir;
    ensure_dir(target);
    io::write_scenario(target, sc);
    lines[i] = "simulated |Q|=" + std::to_string(sc.grid->num_cells()) + " T=" + std::to_string(spec.num_steps) +
               " K=" + std::to_string(spec.num_features) + " N=" + std::to_string(spec.towers.size()) +
               " seed=" + std::to_string(seeds[i]) + " -> " + target.string();
  });
  for (const auto& l : lines) out << l << "\n";
  return kExitOk;
}

struct FitJob {
  std::string label;
  std::shared_ptr<const Model> model;
  FitConfig cfg;
};

struct FitOutcome {
  FitResult result;
  EvalReport report;
};

FitOutcome run_fit_job(const FitJob& job, const io::ScenarioFiles& sc, const std::string& mode, const fs::path& dir) {
  FitOutcome o;
  o.result = fit(job.cfg, *job.model, sc.bearings);
  const auto path = decode(o.result.params, *job.model, sc.bearings, mode);
  o.report = evaluate(sc, *job.model, o.result.params, path, job.label);
  ensure_dir(dir);
  io::write_json(dir / "params.json", io::params_to_json(o.result.params));
  io::write_text(dir / "trace.csv", io::trace_csv(o.result.trace, job.cfg.time_bounded()));
  for (const auto& rec : o.result.trace.records)
    io::write_json(dir / "checkpoints" / ("iter_" + std::to_string(rec.iter) + ".json"), io::params_to_json(rec.params));
  io::write_path_csv(dir / "path.csv", path, *sc.grid);
  return o;
}

int cmd_fit(const Options& o, std::ostream& out) {
  const Json j = io::read_json(o.spec);
  check_keys(j, {"scenario", "fit", "features", "decode", "seeds", "out"}, "fit spec");
  const fs::path base = spec_dir(o);
  const io::ScenarioFiles sc = io::load_scenario(resolve(base, j, "scenario"));
  const auto model = model_for(sc, j, base);
  const Json fit_json = j.value("fit", Json::object());
  FitConfig cfg = io::fit_config_from_json(fit_json, default_init(*model), base);
  if (o.algo) {
    try {
      cfg.algo = algorithm_from_string(*o.algo);
    } catch (const DomainError& e) {
      throw IoError(e.what());
    }
  }
  model->check_params(cfg.init_params);
  cfg.validate();
  const std::string mode = j.value("decode", "viterbi");
  const auto seeds = seeds_for(o, j, static_cast<long>(cfg.seed));
  const fs::path dir = output_dir(o, j);
  ensure_dir(dir);

  std::vector<FitOutcome> outcomes(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    FitJob job{std::string(to_string(cfg.algo)) + "/seed_" + std::to_string(seeds[i]), model, cfg};
    job.cfg.seed = static_cast<std::uint64_t>(seeds[i]);
    outcomes[i] = run_fit_job(job, sc, mode, dir / ("seed_" + std::to_string(seeds[i])));
  });
  std::vector<EvalReport> reports;
  for (const auto& oc : outcomes) reports.push_back(oc.report);
  const EvalReport agg = aggregate(reports, to_string(cfg.algo));
  io::write_json(dir / "aggregate.json", io::eval_report_to_json(agg));
  io::write_text(dir / "aggregate.csv", io::eval_report_csv(std::span<const EvalReport>(&agg, 1)));
  for (std::size_t i = 0; i < seeds.size(); ++i)
    out << "fit " << to_string(cfg.algo) << " seed=" << seeds[i] << " iterations=" << outcomes[i].result.trace.iterations
        << " loglik=" << io::format_double(outcomes[i].report.observed_loglik) << "\n";
  return kExitOk;
}

int cmd_decode(const Options& o, std::ostream& out) {
  const Json j = io::read_json(o.spec);
  check_keys(j, {"scenario", "params", "mode", "marginals", "features", "out"}, "decode spec");
  const fs::path base = spec_dir(o);
  const io::ScenarioFiles sc = io::load_scenario(resolve(base, j, "scenario"));
  const auto model = model_for(sc, j, base);
  const ModelParams params = io::load_params(resolve(base, j, "params"));
  model->check_params(params);
  const fs::path dir = output_dir(o, j);
  ensure_dir(dir);
  const std::string mode = j.value("mode", "viterbi");
  const auto path = decode(params, *model, sc.bearings, mode);
  io::write_path_csv(dir / "path.csv", path, *sc.grid);
  if (j.value("marginals", false))
    io::write_marginals_csv(dir / "marginals.csv", forward_backward(params, *model, sc.bearings, {false, false}));
  out << "decoded " << path.size() << " steps (" << mode << ") -> " << (dir / "path.csv").string() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const Json j = io::read_json(o.spec);
  check_keys(j, {"scenario", "path", "params", "label", "features", "out"}, "eval spec");
  const fs::path base = spec_dir(o);
  const io::ScenarioFiles sc = io::load_scenario(resolve(base, j, "scenario"));
  const auto model = model_for(sc, j, base);
  const auto path = io::read_path_csv(resolve(base, j, "path"), *sc.grid);
  if (path.size() != static_cast<std::size_t>(sc.bearings.num_steps()))
    throw DomainError("dimension mismatch: path has " + std::to_string(path.size()) + " steps, observations have " +
                      std::to_string(sc.bearings.num_steps()));
  ModelParams params;
  if (j.contains("params")) {
    params = io::load_params(resolve(base, j, "params"));
  } else if (sc.truth) {
    params = *sc.truth;
  } else {
    throw IoError("spec: eval needs \"params\" when the scenario has no true_params.json");
  }
  model->check_params(params);
  const EvalReport r = evaluate(sc, *model, params, path, j.value("label", "eval"));
  const fs::path dir = output_dir(o, j);
  ensure_dir(dir);
  io::write_json(dir / "eval.json", io::eval_report_to_json(r));
  io::write_text(dir / "eval.csv", io::eval_report_csv(std::span<const EvalReport>(&r, 1)));
  out << "mean_location_error=" << io::format_double(r.mean_location_error) << "\n";
  return kExitOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  const Json j = io::read_json(o.spec);
  check_keys(j, {"scenario", "configs", "decode", "seeds", "out"}, "compare spec");
  const fs::path base = spec_dir(o);
  const io::ScenarioFiles sc = io::load_scenario(resolve(base, j, "scenario"));
  if (!j.contains("configs") || !j.at("configs").is_array() || j.at("configs").empty())
    throw IoError("spec: compare needs a non-empty \"configs\" list");
  std::vector<FitJob> configs;
  for (const auto& c : j.at("configs")) {
    check_keys(c, {"label", "fit", "features"}, "compare config");
    const auto model = model_for(sc, c, base);
    FitConfig cfg = io::fit_config_from_json(c.value("fit", Json::object()), default_init(*model), base);
    model->check_params(cfg.init_params);
    cfg.validate();
    configs.push_back({c.value("label", std::string(to_string(cfg.algo))), model, cfg});
  }
  const std::string mode = j.value("decode", "viterbi");
  const auto seeds = seeds_for(o, j, 0);
  const fs::path dir = output_dir(o, j);
  ensure_dir(dir);

  std::vector<FitOutcome> outcomes(configs.size() * seeds.size());
  parallel_for(outcomes.size(), [&](std::size_t i) {
    const std::size_t c = i / seeds.size(), s = i % seeds.size();
    FitJob job = configs[c];
    job.cfg.seed = static_cast<std::uint64_t>(seeds[s]);
    job.label = configs[c].label + "/seed_" + std::to_string(seeds[s]);
    outcomes[i] = run_fit_job(job, sc, mode, dir / configs[c].label / ("seed_" + std::to_string(seeds[s])));
  });

  std::vector<EvalReport> rows;
  Json doc = Json::array();
  for (std::size_t c = 0; c < configs.size(); ++c) {
    std::vector<EvalReport> per_seed;
    double iters = 0.0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      per_seed.push_back(outcomes[c * seeds.size() + s].report);
      iters += static_cast<double>(outcomes[c * seeds.size() + s].result.trace.iterations);
    }
    rows.push_back(aggregate(per_seed, configs[c].label));
    Json entry = io::eval_report_to_json(rows.back());
    entry["algo"] = to_string(configs[c].cfg.algo);
    entry["mean_iterations"] = iters / static_cast<double>(seeds.size());
    doc.push_back(entry);
    out << configs[c].label << ": mean_location_error=" << io::format_double(rows.back().mean_location_error)
        << " mean_iterations=" << io::format_double(iters / static_cast<double>(seeds.size())) << "\n";
  }
  io::write_json(dir / "compare.json", doc);
  std::string csv = io::eval_report_csv(rows);
  // Append iteration counts as an extra column.
  std::string with_iters;
  std::istringstream in(csv);
  std::string line;
  for (std::size_t row = 0; std::getline(in, line); ++row) {
    with_iters += line + ",";
    with_iters += row == 0 ? std::string("mean_iterations") : io::format_double(doc[row - 1]["mean_iterations"].get<double>());
    with_iters += "\n";
  }
  io::write_text(dir / "compare.csv", with_iters);
  return kExitOk;
}

}  // namespace

std::vector<long> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) return {std::stol(text)};
    const long a = std::stol(text.substr(0, dots));
    const long b = std::stol(text.substr(dots + 2));
    if (b < a) throw IoError("seed range '" + text + "' is empty");
    std::vector<long> out;
    for (long s = a; s <= b; ++s) out.push_back(s);
    return out;
  } catch (const std::logic_error&) {
    throw IoError("invalid seed range '" + text + "' (expected a..b)");
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radio-telemetry movement model toolkit"};
  app.require_subcommand(1);
  Options o;
  std::string spec, out_dir, seeds, algo;
  for (const char* name : {"simulate", "fit", "decode", "eval", "compare"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--spec", spec, "JSON spec file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seeds", seeds, "seed or inclusive range a..b");
    sub->add_option("--algo", algo, "em or sg");
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "telemovr: " << e.what() << "\n";
    return kExitIo;
  }
  o.command = app.get_subcommands().front()->get_name();
  o.spec = spec;
  if (!out_dir.empty()) o.out = fs::path(out_dir);
  if (!seeds.empty()) o.seeds = seeds;
  if (!algo.empty()) o.algo = algo;

  try {
    if (o.command == "simulate") return cmd_simulate(o, out);
    if (o.command == "fit") return cmd_fit(o, out);
    if (o.command == "decode") return cmd_decode(o, out);
    if (o.command == "eval") return cmd_eval(o, out);
    return cmd_compare(o, out);
  } catch (const IoError& e) {
    err << "telemovr " << o.command << ": " << e.what() << "\n";
    return kExitIo;
  } catch (const Json::exception& e) {
    err << "telemovr " << o.command << ": malformed spec: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "telemovr " << o.command << ": " << e.what() << "\n";
    return kExitIo;
  } catch (const DomainError& e) {
    err << "telemovr " << o.command << ": " << e.what() << "\n";
    return kExitDomain;
  } catch (const EstimationError& e) {
    err << "telemovr " << o.command << ": " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "telemovr " << o.command << ": " << e.what() << "\n";
    return kExitDomain;
  }
}

}  // namespace telemovr::cli
