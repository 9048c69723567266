#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "refinery/bench.hpp"
#include "refinery/errors.hpp"

namespace refinery::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out_dir = "refinery-out";
  std::optional<double> budget_seconds;
  std::string strategy;
};

StrategyConfig strategy_from_flag(const std::string& name) {
  std::string kind = name;
  for (auto& c : kind) {
    if (c == '-') c = '_';
  }
  StrategyConfig s = StrategyConfig::from_json(nlohmann::json(kind));
  // A bare `scripted` has nothing to replay; enumerate instead.
  if (s.kind == StrategyKind::scripted) s.exhaustive = true;
  return s;
}

// Applies the global flags to a loaded instance.
void apply(const Globals& g, InstanceFile& f) {
  if (g.seed) f.instance.engine.seed = *g.seed;
  if (g.budget_seconds) f.instance.engine.budget_seconds = g.budget_seconds;
  if (!g.strategy.empty()) {
    f.instance.engine.subspace_strategy = f.instance.engine.assignment_strategy = strategy_from_flag(g.strategy);
  }
}

fs::path output_dir(const Globals& g) {
  fs::path dir(g.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

int report_run(const RunReport& report, const InstanceFile& f, const fs::path& report_path, std::ostream& out,
               std::ostream& err) {
  out << "report: " << report_path.string() << "\n";
  if (!report.best) {
    err << "warning: no sample was evaluated\n";
    return unsatisfied;
  }
  if (report.status == RunStatus::satisfied) {
    out << "status: satisfied (deviation " << fixed(report.best->deviation) << ", distance "
        << fixed(report.best->distance) << ", " << report.samples.size() << " samples)\n";
    out << report.refined_sql << "\n";
    return ok;
  }
  err << "warning: no assignment reached deviation <= " << format_number(f.instance.epsilon)
      << "; printing the least-deviating candidate (deviation " << fixed(report.best->deviation) << ")\n";
  out << "status: unsatisfied\n" << report.refined_sql << "\n";
  return unsatisfied;
}

int cmd_refine(const Globals& g, const std::string& path, TransportFactory transport, std::ostream& out,
               std::ostream& err) {
  InstanceFile f = InstanceFile::load(path);
  apply(g, f);
  RefinementEngine engine(f.instance, std::move(transport));
  RunReport report = engine.run();
  const fs::path dir = output_dir(g);
  const fs::path report_path = dir / (f.name + ".report.json");
  write_file(report_path, report.to_json().dump(2) + "\n");
  write_file(dir / (f.name + ".samples.jsonl"), report.sample_log());
  return report_run(report, f, report_path, out, err);
}

int cmd_baseline(const Globals& g, const std::string& path, std::size_t samples, std::ostream& out,
                 std::ostream& err) {
  InstanceFile f = InstanceFile::load(path);
  apply(g, f);
  RefinementEngine engine(f.instance);
  RunReport report = engine.run_baseline_sampling(samples);
  const fs::path dir = output_dir(g);
  const fs::path report_path = dir / (f.name + ".baseline.json");
  write_file(report_path, report.to_json().dump(2) + "\n");
  write_file(dir / (f.name + ".baseline.jsonl"), report.sample_log());
  return report_run(report, f, report_path, out, err);
}

int cmd_probe(const Globals& g, const std::string& path, std::ostream& out) {
  InstanceFile f = InstanceFile::load(path);
  apply(g, f);
  RefinementEngine engine(f.instance);
  const auto& q = engine.query();
  const auto labels = predicate_labels(q);
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < q.predicates.size(); ++i) {
    const auto& p = q.predicates[i];
    const auto& e = engine.domain().entries[i];
    nlohmann::ordered_json item{{"predicate", labels[i]},
                                {"attribute", p.attribute},
                                {"kind", p.attribute_kind == AttributeKind::derived ? "derived" : "base"}};
    if (const auto* n = std::get_if<NumericRange>(&e.range)) {
      item["bounds"] = {n->lo, n->hi};
      item["integer"] = n->integral;
    } else {
      item["values"] = std::get<CategoricalRange>(e.range).cmax;
    }
    auto probe_json = [](const ProbeBounds& b) {
      return nlohmann::ordered_json{{"lo", b.lo}, {"hi", b.hi}, {"sql", b.sql}};
    };
    if (e.unfiltered) item["unfiltered_probe"] = probe_json(*e.unfiltered);
    if (e.filtered) item["filtered_probe"] = probe_json(*e.filtered);
    if (e.from_static_bounds) item["source"] = "static_bounds";
    if (e.from_fallback) item["source"] = "model";
    doc.push_back(std::move(item));
  }
  out << doc.dump(2) << "\n";
  return ok;
}

int cmd_bench(const Globals& g, const std::string& dir, std::size_t repeats, std::size_t workers,
              TransportFactory transport, std::ostream& out) {
  const auto paths = discover_instances(dir);
  if (paths.empty()) throw InstanceError("no instance files in " + dir);
  SuiteOptions opt;
  opt.repeats = repeats;
  opt.seed = g.seed;
  opt.budget_seconds = g.budget_seconds;
  opt.workers = workers;
  opt.transport = std::move(transport);
  if (!g.strategy.empty()) opt.strategy = strategy_from_flag(g.strategy);
  const fs::path out_dir = output_dir(g);
  opt.log_dir = out_dir / "logs";
  SuiteReport report = run_suite(paths, opt);
  write_file(out_dir / "suite.json", report.to_json().dump(2) + "\n");
  write_file(out_dir / "suite.csv", report.to_csv());

  out << std::left << std::setw(24) << "instance" << std::setw(11) << "class" << std::setw(9) << "success"
      << "best opt\n";
  for (const auto& r : report.instances) {
    out << std::setw(24) << r.name << std::setw(11) << r.instance_class << std::setw(9) << fixed(r.success_rate, 2)
        << (r.best_optimality ? fixed(*r.best_optimality, 3) : std::string("-"));
    if (!r.error.empty()) out << "  error: " << r.error;
    out << "\n";
  }
  out << "report: " << (out_dir / "suite.json").string() << "\n";
  return ok;
}

}  // namespace

std::string describe_text(const std::string& instance_path) {
  InstanceFile f = InstanceFile::load(instance_path);
  RefinementEngine engine(f.instance);
  const auto& s = f.instance.engine.subspace_strategy;
  const PromptTemplates templates = s.prompt_dir ? PromptTemplates::from_directory(*s.prompt_dir)
                                                 : PromptTemplates::embedded();
  SkylineSet empty(f.instance.epsilon);
  ProposalContext ctx;
  ctx.query = &engine.query();
  ctx.domain = &engine.domain();
  ctx.brief = &engine.brief();
  ctx.skyline = &empty;
  ctx.rounds = f.instance.engine.iterations;
  ctx.samples = f.instance.engine.samples;

  std::string text;
  auto dump = [&](const char* title, const std::vector<ChatMessage>& messages) {
    text += std::string("==== ") + title + " ====\n";
    for (const auto& m : messages) text += "[" + m.role + "]\n" + m.content + "\n";
  };
  dump("subspace prompt", build_subspace_prompt(ctx, templates));
  text += "\n";
  dump("assignment prompt", build_assignment_prompt(ctx, engine.domain().as_subspace(), templates));
  return text;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, TransportFactory transport) {
  CLI::App app{"SQL query refinement under output constraints", "refinery"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed for every run");
  app.add_option("--out", g.out_dir, "directory for reports and logs")->capture_default_str();
  app.add_option("--budget-seconds", g.budget_seconds, "wall-clock budget per run")->check(CLI::PositiveNumber);

  const std::vector<std::string> strategies{"llm", "random", "uniform_random", "local-search", "local_search",
                                            "scripted"};
  std::string instance;
  auto* refine = app.add_subcommand("refine", "run one refinement and print the refined SQL");
  refine->add_option("instance", instance, "instance file")->required();
  refine->add_option("--strategy", g.strategy, "override both proposal roles")->check(CLI::IsMember(strategies));

  std::string dir;
  std::size_t repeats = 5, workers = 1;
  auto* bench = app.add_subcommand("bench", "run every instance in a directory several times");
  bench->add_option("dir", dir, "directory of instance files")->required();
  bench->add_option("--repeats", repeats, "runs per instance")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--workers", workers, "concurrent runs")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--strategy", g.strategy, "override both proposal roles")->check(CLI::IsMember(strategies));

  auto* describe = app.add_subcommand("describe", "print the cold-start prompts without running");
  describe->add_option("instance", instance, "instance file")->required();

  auto* probe = app.add_subcommand("probe", "print the subspace domain and its probes");
  probe->add_option("instance", instance, "instance file")->required();

  std::size_t samples = 100;
  auto* baseline = app.add_subcommand("baseline", "uniform random sampling over the whole domain");
  baseline->add_option("instance", instance, "instance file")->required();
  baseline->add_option("--samples", samples, "number of draws")->capture_default_str()->check(CLI::PositiveNumber);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return usage;
  }

  try {
    if (refine->parsed()) return cmd_refine(g, instance, transport, out, err);
    if (bench->parsed()) return cmd_bench(g, dir, repeats, workers, transport, out);
    if (describe->parsed()) {
      out << describe_text(instance);
      return ok;
    }
    if (probe->parsed()) return cmd_probe(g, instance, out);
    if (baseline->parsed()) return cmd_baseline(g, instance, samples, out, err);
  } catch (const InstanceError& e) {
    err << "error: " << e.what() << "\n";
    return usage;
  } catch (const SpecError& e) {
    err << "error: " << e.what() << "\n";
    return usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return runtime;
  }
  return usage;
}

}  // namespace refinery::cli
