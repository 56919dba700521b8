#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "autocode/analysis.hpp"
#include "autocode/config.hpp"
#include "autocode/curation.hpp"
#include "autocode/env.hpp"
#include "autocode/error.hpp"
#include "autocode/jsonl.hpp"
#include "autocode/llm/client.hpp"
#include "autocode/llm/export.hpp"
#include "autocode/optim.hpp"
#include "autocode/policy.hpp"
#include "autocode/sandbox.hpp"

#ifndef AUTOCODE_REVISION
#define AUTOCODE_REVISION "unknown"
#endif

namespace fs = std::filesystem;

namespace autocode::cli {

json to_json(const RunManifest& m) {
  json j{{"command", m.command},         {"argv", m.argv},         {"config", m.config},
         {"config_hash", m.config_hash}, {"overrides", m.overrides}, {"seed", m.seed},
         {"revision", m.revision},       {"started_at", m.started_at}, {"finished_at", m.finished_at},
         {"artifacts", m.artifacts},     {"status", m.status}};
  if (!m.method.empty()) j["method"] = m.method;
  if (!m.error.empty()) j["error"] = m.error;
  return j;
}

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RunExists : public Error {
 public:
  using Error::Error;
};

std::string utc_now(const char* fmt) {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, fmt, &tm);
  return buf;
}

// Everything shared by the subcommands.
struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out_root = "runs";
  std::string run_dir;
  bool force = false;
};

struct Context {
  Config cfg;
  fs::path dir;
  RunManifest manifest;
  std::ostream* out = nullptr;

  void write(const std::string& rel, std::string_view text) {
    write_text_file(dir / rel, text);
    manifest.artifacts.push_back(rel);
  }
};

Config resolve_config(const Common& c, const CLI::App& app, std::vector<std::string>& overrides) {
  Config cfg;
  if (!c.config_path.empty()) {
    try {
      cfg = load_config(c.config_path);
    } catch (const Error& e) {
      throw ConfigError("cannot load config '" + c.config_path + "': " + e.what());
    }
  }
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    try {
      set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    } catch (const Error& e) {
      throw UsageError(std::string("--set ") + s + ": " + e.what());
    }
    overrides.push_back(s);
  }
  if (app.count("--seed")) {
    cfg.seed = c.seed;
    overrides.push_back("seed=" + std::to_string(c.seed));
  }
  if (app.count("--workers")) {
    cfg.workers = c.workers;
    overrides.push_back("workers=" + std::to_string(c.workers));
  }
  try {
    validate(cfg);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

fs::path prepare_run_dir(const Common& c, const std::string& label) {
  fs::path dir = c.run_dir.empty() ? fs::path(c.out_root) / (utc_now("%Y%m%dT%H%M%SZ") + "-" + label) : fs::path(c.run_dir);
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!c.force) throw RunExists("run directory '" + dir.string() + "' is not empty (use --force to overwrite)");
    fs::remove_all(dir);
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  return dir;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing --") + what);
  if (!fs::exists(path)) throw MissingInput(std::string(what) + " '" + path + "' does not exist");
}

std::vector<env::SynthQuerySpec> load_suite(const std::string& path) {
  require_file(path, "suite");
  return env::read_suite(path);
}

policy::PolicyParams load_checkpoint(const std::string& path, std::span<const env::SynthQuerySpec> suite) {
  require_file(path, "checkpoint");
  auto p = policy::read_checkpoint(path);
  if (p.layout->size() != suite.size()) throw ShapeMismatch("checkpoint does not match the suite");
  for (std::size_t q = 0; q < suite.size(); ++q)
    if (p.layout->query_ids[q] != suite[q].query_id || p.layout->steps[q] != suite[q].steps())
      throw ShapeMismatch("checkpoint does not match the suite at '" + suite[q].query_id + "'");
  return p;
}

policy::PolicyParams start_policy(const Config& cfg, std::span<const env::SynthQuerySpec> suite,
                                  const std::string& checkpoint) {
  if (!checkpoint.empty()) return load_checkpoint(checkpoint, suite);
  const auto demos = cfg.init == "imitation" ? optim::make_demonstrations(suite, cfg, cfg.seed) : std::vector<Trajectory>{};
  return optim::initial_policy(cfg, suite, demos);
}

std::vector<Query> load_queries(const std::string& path) {
  require_file(path, "queries");
  const auto records = read_jsonl(path);
  return from_json_records<Query>(records);
}

// --- subcommands ---------------------------------------------------------------------

struct GenEnvArgs {
  int n = -1;
  std::string profile;
};

void cmd_gen_env(Context& ctx, const GenEnvArgs& a) {
  const int n = a.n > 0 ? a.n : ctx.cfg.n_queries;
  const auto profile = env::parse_profile(a.profile.empty() ? ctx.cfg.profile : a.profile);
  const auto suite = env::generate_suite(ctx.cfg.seed, n, profile);
  ctx.write("suite.jsonl", dump_jsonl(to_json_records<env::SynthQuerySpec>(suite)));
  const auto queries = env::suite_queries(suite);
  ctx.write("queries.jsonl", dump_jsonl(to_json_records<Query>(queries)));
  *ctx.out << "generated " << n << " queries (" << env::to_string(profile) << ")\n";
}

struct CurateArgs {
  std::string suite, checkpoint, queries;
  bool llm = false;
  bool no_sandbox = false;
};

void cmd_curate(Context& ctx, const CurateArgs& a) {
  const auto& cfg = ctx.cfg;
  curation::CurationResult res;
  if (a.llm) {
    const auto queries = load_queries(a.queries);
    llm::Client client(cfg.endpoint);
    std::unique_ptr<sandbox::ExecutorPool> pool;
    if (!a.no_sandbox) {
      const auto argv = sandbox::split_command(cfg.sandbox.command);
      const auto sb = cfg.sandbox;
      pool = std::make_unique<sandbox::ExecutorPool>(
          [argv, sb] { return std::make_unique<sandbox::WorkerProcess>(argv, sb); }, cfg.sandbox.pool_size);
    }
    rollout::LlmBackend backend{&client, pool.get(), queries, cfg.prefix_guidance, cfg.max_rounds};
    Rng rng(derive_seed(cfg.seed, {1}));
    res = curation::curate(queries, nullptr, cfg.K, cfg.alpha, cfg.subsample_size, cfg.strategy_variant, backend, rng);
    res.dataset.provenance.config_hash = config_hash(cfg);
    res.dataset.provenance.seed = cfg.seed;
  } else {
    const auto suite = load_suite(a.suite);
    const auto p = start_policy(cfg, suite, a.checkpoint);
    res = curation::curate(suite, p, cfg, cfg.seed, kernels::ExecPolicy::parallel(cfg.workers));
  }
  res.dataset.provenance.source = "rollouts.jsonl";
  ctx.write("rollouts.jsonl", dump_jsonl(to_json_records<Trajectory>(res.rollouts)));
  ctx.write("qtable.jsonl", curation::qtable_text(res.qtable));
  ctx.write("strategy.jsonl", curation::strategy_text(res.strategy));
  ctx.write("dataset.jsonl", curation::dataset_text(res.dataset));
  *ctx.out << "curated " << res.dataset.examples.size() << " examples from " << res.rollouts.size()
           << " rollouts; " << res.dataset.flagged.size() << " queries flagged\n";
}

struct TrainArgs {
  std::string method, suite, checkpoint;
};

void cmd_train(Context& ctx, const TrainArgs& a) {
  const auto& cfg = ctx.cfg;
  const auto suite = load_suite(a.suite);
  optim::ArtifactSink sink{ctx.dir, true, {}};
  optim::TrainState st;
  if (a.method == "em") {
    ctx.manifest.method = "em";
    st = optim::em_train(cfg, suite, start_policy(cfg, suite, a.checkpoint), &sink);
  } else {
    const auto kind = optim::parse_baseline(a.method);
    ctx.manifest.method = std::string(optim::to_string(kind));
    std::vector<Trajectory> demos;
    if (kind == optim::BaselineKind::imitation || (kind == optim::BaselineKind::onpolicy_rl && cfg.init == "imitation"))
      demos = optim::make_demonstrations(suite, cfg, cfg.seed);
    policy::PolicyParams init;
    if (!a.checkpoint.empty()) {
      init = load_checkpoint(a.checkpoint, suite);
    } else if (kind == optim::BaselineKind::base_rl) {
      init = policy::base_policy(policy::make_layout(suite), cfg.base_trigger_bias, cfg.base_reason_bias, cfg.coupling);
    } else if (kind == optim::BaselineKind::imitation) {
      init = policy::uniform_policy(policy::make_layout(suite), cfg.coupling);
    } else {
      init = optim::initial_policy(cfg, suite, demos);
    }
    st = optim::baseline_train(kind, cfg, suite, init, demos, &sink);
  }
  for (const auto& p : sink.written) ctx.manifest.artifacts.push_back(p.generic_string());
  ctx.write("metrics.csv", optim::metrics_csv(st.metrics));
  std::vector<std::string> ids(st.policy.layout->query_ids.begin(), st.policy.layout->query_ids.end());
  ctx.write("invocations.jsonl", optim::invocations_text(st.invocations, ids));
  ctx.write("config.toml", to_toml(cfg));
  const auto& last = st.metrics.back();
  *ctx.out << ctx.manifest.method << ": " << st.metrics.size() << " metric rows, final pass1 "
           << format_double(last.pass1_dev) << " after " << st.interactions << " interactions\n";
  if (st.skipped_nonfinite) *ctx.out << "skipped " << st.skipped_nonfinite << " examples with non-finite ratios\n";
}

struct EvalArgs {
  std::string suite, checkpoint, arms = "auto,cot,code";
  int n = -1;
};

void cmd_eval(Context& ctx, const EvalArgs& a) {
  const auto& cfg = ctx.cfg;
  const auto suite = load_suite(a.suite);
  const auto p = load_checkpoint(a.checkpoint, suite);
  std::vector<analysis::Arm> arms;
  try {
    arms = analysis::parse_arms(a.arms);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const int n = a.n > 0 ? a.n : cfg.eval_samples;
  auto r = analysis::evaluate(suite, p, n, derive_seed(cfg.seed, {0xE7A1}), arms,
                              kernels::ExecPolicy::parallel(cfg.workers));
  r.temperature = cfg.endpoint.temperature;
  r.top_p = cfg.endpoint.top_p;
  ctx.write("eval.jsonl", analysis::eval_text(r));
  std::string csv = "arm,pass1,ci_lo,ci_hi,samples\n";
  for (auto arm : arms) {
    const auto& rows = r.arm(arm);
    const double p1 = analysis::pass_at_1(rows, n);
    std::size_t succ = 0;
    for (const auto& row : rows) succ += std::accumulate(row.begin(), row.end(), std::size_t{0});
    const auto [lo, hi] = analysis::binomial_ci(succ, rows.size() * n);
    csv += std::string(analysis::to_string(arm)) + "," + format_double(p1) + "," + format_double(lo) + "," +
           format_double(hi) + "," + std::to_string(rows.size() * n) + "\n";
    *ctx.out << analysis::to_string(arm) << " pass@1 " << format_double(p1) << "\n";
  }
  ctx.write("pass1.csv", csv);
}

struct AnalyzeArgs {
  std::string what;
  std::vector<std::string> runs;
  std::string eval, suite;
  std::vector<std::string> rollouts;
};

json read_manifest(const fs::path& run) {
  const auto path = run / "manifest.json";
  require_file(path.string(), "manifest");
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid manifest: ") + e.what(), 1);
  }
}

void cmd_analyze(Context& ctx, const AnalyzeArgs& a) {
  const auto& cfg = ctx.cfg;
  if (a.what == "fig5") {
    if (a.runs.empty()) throw UsageError("fig5 needs --runs");
    std::vector<analysis::Trace> traces;
    for (const auto& run : a.runs) {
      const auto m = read_manifest(run);
      analysis::Trace t;
      t.method = m.value("method", "unknown");
      t.seed = m.value("seed", std::uint64_t{0});
      require_file((fs::path(run) / "metrics.csv").string(), "metrics");
      t.rows = optim::parse_metrics_csv(read_text_file(fs::path(run) / "metrics.csv"));
      traces.push_back(std::move(t));
    }
    std::optional<double> optimum;
    if (!a.suite.empty()) {
      const auto suite = load_suite(a.suite);
      double s = 0.0;
      for (const auto& q : suite) s += env::optimal_success(q);
      optimum = s / static_cast<double>(suite.size());
    }
    const auto curves = analysis::efficiency_curves(traces);
    const auto csv = analysis::efficiency_csv(traces);
    ctx.write("efficiency.csv", csv);
    ctx.write("efficiency.svg", analysis::efficiency_svg(curves, optimum, csv));
    for (const auto& c : curves)
      *ctx.out << c.method << ": final pass1 " << format_double(c.final_mean) << " over " << c.seeds << " seed(s)\n";
  } else if (a.what == "fig6") {
    if (a.runs.size() != 1) throw UsageError("fig6 needs exactly one --runs directory");
    const fs::path run = a.runs[0];
    const auto path = run / "invocations.jsonl";
    require_file(path.string(), "invocations");
    const auto text = read_text_file(path);
    const auto slices = optim::parse_invocations(text);
    const auto header = parse_jsonl(text).at(0);
    const auto ids = header.at("queries").get<std::vector<std::string>>();
    const auto b = analysis::invocation_histogram(slices, ids, cfg.extremity_low, cfg.extremity_high);
    const auto m = read_manifest(run);
    ctx.write("invocation_phase_hist.csv", analysis::invocation_hist_csv(b));
    ctx.write("invocation_phase_hist.svg",
              analysis::invocation_svg(b, "code invocation rates by phase: " + m.value("method", std::string("run"))));
    for (std::size_t k = 0; k < b.phases.size(); ++k)
      *ctx.out << "phase " << k + 1 << " extremity " << format_double(b.phases[k].extremity) << "\n";
  } else if (a.what == "fig7") {
    if (a.eval.empty()) throw UsageError("fig7 needs --eval");
    const auto path = fs::path(a.eval) / "eval.jsonl";
    require_file(path.string(), "eval");
    const auto r = analysis::parse_eval(read_text_file(path));
    const auto s = analysis::selection_report(r);
    ctx.write("selection_report.csv", analysis::selection_report_csv(s));
    ctx.write("selection_report.svg", analysis::selection_svg(s));
    *ctx.out << analysis::selection_report_csv(s);
  } else if (a.what == "rounds") {
    if (a.rollouts.empty()) throw UsageError("rounds needs --rollouts");
    std::vector<Trajectory> all;
    for (const auto& f : a.rollouts) {
      require_file(f, "rollouts");
      auto ts = read_trajectories(f);
      all.insert(all.end(), ts.begin(), ts.end());
    }
    const auto d = analysis::round_distribution(all, cfg.max_rounds);
    ctx.write("rounds.csv", analysis::round_distribution_csv(d));
    *ctx.out << analysis::round_distribution_csv(d);
  } else {
    throw UsageError("unknown analysis '" + a.what + "'");
  }
}

struct ExportArgs {
  std::string dataset, queries;
};

void cmd_export(Context& ctx, const ExportArgs& a) {
  require_file(a.dataset, "dataset");
  const auto d = curation::read_dataset(a.dataset);
  const auto queries = load_queries(a.queries);
  const auto text = llm::export_text(d, queries);
  llm::parse_export(text);  // self-check before publishing
  ctx.write("export.jsonl", text);
  *ctx.out << "exported " << d.examples.size() << " records\n";
}

int exit_code_of(const std::exception_ptr& ep, std::ostream& err) {
  try {
    std::rethrow_exception(ep);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const RunExists& e) {
    err << "run exists: " << e.what() << "\n";
    return kRunExists;
  } catch (const MissingInput& e) {
    err << "missing input: " << e.what() << "\n";
    return kMissingInput;
  } catch (const llm::TransportError& e) {
    err << "endpoint error: " << e.what() << "\n";
    return kEndpoint;
  } catch (const llm::RequestError& e) {
    err << "endpoint error: " << e.what() << "\n";
    return kEndpoint;
  } catch (const sandbox::WorkerError& e) {
    err << "sandbox error: " << e.what() << "\n";
    return kEndpoint;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"autocode: EM-style learning of when to call the code interpreter"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("-c,--config", common.config_path, "TOML config file");
  app.add_option("--set", common.sets, "override a config key (key=value), repeatable");
  app.add_option("--seed", common.seed, "master seed (overrides the config)");
  app.add_option("--workers", common.workers, "bound on worker threads (0 = OpenMP default)");
  app.add_option("--out", common.out_root, "root under which timestamped run directories are created");
  app.add_option("--run-dir", common.run_dir, "explicit run directory instead of a timestamped one");
  app.add_flag("--force", common.force, "overwrite a non-empty run directory");
  app.footer("Config keys (use --set key=value or a TOML file):\n" + config_help() +
             "\nThe endpoint token is read from the environment variable named by endpoint.api_key_env.");

  GenEnvArgs gen;
  auto* sc_gen = app.add_subcommand("gen-env", "generate a synthetic query suite");
  sc_gen->add_option("--n", gen.n, "number of queries (default: n_queries)");
  sc_gen->add_option("--profile", gen.profile, "suite profile (default: profile)");

  CurateArgs cur;
  auto* sc_cur = app.add_subcommand("curate", "run one E-step and write the curated dataset");
  sc_cur->add_option("--suite", cur.suite, "suite.jsonl (simulation)");
  sc_cur->add_option("--checkpoint", cur.checkpoint, "policy checkpoint (default: initial policy per config)");
  sc_cur->add_option("--queries", cur.queries, "queries.jsonl (endpoint mode)");
  sc_cur->add_flag("--llm", cur.llm, "probe the configured inference endpoint instead of the simulator");
  sc_cur->add_flag("--no-sandbox", cur.no_sandbox, "endpoint mode without code execution");

  TrainArgs tr;
  auto* sc_tr = app.add_subcommand("train", "train a policy: em | ppo | sft | base-rl");
  sc_tr->add_option("method", tr.method, "em | ppo | sft | base-rl")
      ->required()
      ->check(CLI::IsMember({"em", "ppo", "sft", "base-rl"}));
  sc_tr->add_option("--suite", tr.suite, "suite.jsonl")->required();
  sc_tr->add_option("--checkpoint", tr.checkpoint, "initial policy checkpoint");

  EvalArgs ev;
  auto* sc_ev = app.add_subcommand("eval", "evaluate a checkpoint under autonomous and forced modalities");
  sc_ev->add_option("--suite", ev.suite, "suite.jsonl")->required();
  sc_ev->add_option("--checkpoint", ev.checkpoint, "policy checkpoint")->required();
  sc_ev->add_option("--arms", ev.arms, "comma-separated subset of auto,cot,code");
  sc_ev->add_option("--n", ev.n, "samples per query and arm (default: eval_samples)");

  AnalyzeArgs an;
  auto* sc_an = app.add_subcommand("analyze", "reports: fig5 (efficiency), fig6 (invocation phases), fig7 (selection), rounds");
  sc_an->add_option("what", an.what, "fig5 | fig6 | fig7 | rounds")
      ->required()
      ->check(CLI::IsMember({"fig5", "fig6", "fig7", "rounds"}));
  sc_an->add_option("--runs", an.runs, "train run directories");
  sc_an->add_option("--eval", an.eval, "eval run directory");
  sc_an->add_option("--suite", an.suite, "suite.jsonl, for the optimum marker in fig5");
  sc_an->add_option("--rollouts", an.rollouts, "trajectory files for rounds");

  ExportArgs exp;
  auto* sc_exp = app.add_subcommand("export", "export a curated dataset for external trainers");
  sc_exp->add_option("--dataset", exp.dataset, "dataset.jsonl")->required();
  sc_exp->add_option("--queries", exp.queries, "queries.jsonl")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }

  Context ctx;
  ctx.out = &out;
  const auto* sub = app.get_subcommands().front();
  std::string label = sub->get_name();
  if (sub == sc_tr) label += "-" + tr.method;
  if (sub == sc_an) label += "-" + an.what;
  ctx.manifest.command = label;
  ctx.manifest.argv = args;
  ctx.manifest.revision = AUTOCODE_REVISION;
  ctx.manifest.started_at = utc_now("%Y-%m-%dT%H:%M:%SZ");

  try {
    ctx.cfg = resolve_config(common, app, ctx.manifest.overrides);
    ctx.dir = prepare_run_dir(common, label);
  } catch (...) {
    return exit_code_of(std::current_exception(), err);
  }
  ctx.manifest.config = config_snapshot(ctx.cfg);
  ctx.manifest.config_hash = config_hash(ctx.cfg);
  ctx.manifest.seed = ctx.cfg.seed;

  int code = kOk;
  try {
    if (sub == sc_gen) cmd_gen_env(ctx, gen);
    else if (sub == sc_cur) cmd_curate(ctx, cur);
    else if (sub == sc_tr) cmd_train(ctx, tr);
    else if (sub == sc_ev) cmd_eval(ctx, ev);
    else if (sub == sc_an) cmd_analyze(ctx, an);
    else cmd_export(ctx, exp);
  } catch (...) {
    std::ostringstream msg;
    code = exit_code_of(std::current_exception(), msg);
    err << msg.str();
    ctx.manifest.status = "failed";
    ctx.manifest.error = msg.str();
    if (!ctx.manifest.error.empty() && ctx.manifest.error.back() == '\n') ctx.manifest.error.pop_back();
  }
  ctx.manifest.finished_at = utc_now("%Y-%m-%dT%H:%M:%SZ");
  std::vector<std::string> unique;
  for (const auto& a : ctx.manifest.artifacts)
    if (std::find(unique.begin(), unique.end(), a) == unique.end()) unique.push_back(a);
  ctx.manifest.artifacts = std::move(unique);
  try {
    write_text_file(ctx.dir / "manifest.json", to_json(ctx.manifest).dump(2) + "\n");
  } catch (...) {
    if (code == kOk) code = exit_code_of(std::current_exception(), err);
  }
  if (code == kOk) out << "run directory: " << ctx.dir.string() << "\n";
  return code;
}

}  // namespace autocode::cli
