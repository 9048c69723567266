#include "refinery/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "refinery/errors.hpp"

namespace refinery {

namespace fs = std::filesystem;
using oj = nlohmann::ordered_json;

namespace {

const char* const kClasses[] = {"topk", "range", "diversity", "complex"};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path out(p);
  return out.is_absolute() ? out : base / out;
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string optional_number(const std::optional<double>& v) { return v ? number(*v) : ""; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

oj optional_json(const std::optional<double>& v) { return v ? oj(*v) : oj(nullptr); }

oj tokens_json(const TokenUsage& t) {
  return {{"prompt", t.prompt_tokens}, {"completion", t.completion_tokens}, {"total", t.total_tokens}};
}

}  // namespace

// ---------------------------------------------------------------- instance files

InstanceFile InstanceFile::parse(const nlohmann::json& doc, const fs::path& base_dir, std::string fallback_name) {
  if (!doc.is_object()) throw InstanceError("an instance file holds a JSON object");
  InstanceFile f;
  f.base_dir = base_dir;
  try {
    const int version = doc.value("format_version", 0);
    if (version != kInstanceFormatVersion) {
      throw InstanceError("unsupported format_version " + std::to_string(version) + " (expected " +
                          std::to_string(kInstanceFormatVersion) + ")");
    }
    f.name = doc.value("name", fallback_name);
    if (!doc.contains("dataset")) throw InstanceError("missing dataset");
    f.dataset_source = doc["dataset"];
    if (f.dataset_source.is_string()) {
      f.instance.dataset = DatasetManifest::from_file(resolve(base_dir, f.dataset_source.get<std::string>()));
    } else {
      f.instance.dataset = DatasetManifest::from_json(f.dataset_source, base_dir);
    }
    if (!doc.contains("query") || !doc["query"].is_string()) throw InstanceError("missing query text");
    f.instance.query = doc["query"].get<std::string>();
    if (!doc.contains("constraints")) throw InstanceError("missing constraints");
    f.instance.constraints = ConstraintSpec::from_json(doc["constraints"]);
    f.instance.epsilon = doc.value("epsilon", f.instance.epsilon);
    if (doc.contains("distance")) f.instance.distance = DistanceSpec::from_json(doc["distance"]);
    if (doc.contains("engine")) f.instance.engine = EngineConfig::from_json(doc["engine"]);
    for (StrategyConfig* s : {&f.instance.engine.subspace_strategy, &f.instance.engine.assignment_strategy}) {
      if (s->prompt_dir && s->prompt_dir->is_relative()) s->prompt_dir = base_dir / *s->prompt_dir;
    }
    if (doc.contains("meta")) {
      const auto& m = doc["meta"];
      f.meta.instance_class = m.value("class", std::string());
      if (!f.meta.instance_class.empty() &&
          std::find(std::begin(kClasses), std::end(kClasses), f.meta.instance_class) == std::end(kClasses)) {
        throw InstanceError("unknown instance class '" + f.meta.instance_class + "'");
      }
      if (m.contains("delta_opt") && !m["delta_opt"].is_null()) f.meta.delta_opt = m["delta_opt"].get<double>();
      f.meta.note = m.value("note", std::string());
    }
  } catch (const InstanceError&) {
    throw;
  } catch (const Error& e) {
    throw InstanceError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw InstanceError(std::string("malformed instance file: ") + e.what());
  }
  f.instance.validate();
  return f;
}

InstanceFile InstanceFile::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InstanceError("cannot open instance file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InstanceError(path.string() + ": " + e.what());
  }
  try {
    return parse(doc, path.parent_path(), path.stem().string());
  } catch (const InstanceError& e) {
    throw InstanceError(path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json InstanceFile::to_json() const {
  oj out{{"format_version", kInstanceFormatVersion},
         {"name", name},
         {"dataset", dataset_source},
         {"query", instance.query},
         {"constraints", instance.constraints.to_json()},
         {"epsilon", instance.epsilon},
         {"distance", instance.distance.to_json()},
         {"engine", instance.engine.to_json()}};
  oj meta = oj::object();
  if (!this->meta.instance_class.empty()) meta["class"] = this->meta.instance_class;
  if (this->meta.delta_opt) meta["delta_opt"] = *this->meta.delta_opt;
  if (!this->meta.note.empty()) meta["note"] = this->meta.note;
  out["meta"] = std::move(meta);
  return out;
}

std::vector<fs::path> discover_instances(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InstanceError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_object() && doc.contains("format_version")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- scoring

std::optional<double> run_optimality(double bounded_distance, double delta_opt, double delta_max) {
  try {
    return optimality(bounded_distance, delta_opt, delta_max);
  } catch (const DegenerateDenominator&) {
    return std::nullopt;
  }
}

void score_instance(InstanceResult& result) {
  std::size_t ok = 0;
  result.best_optimality.reset();
  for (const auto& r : result.repeats) {
    if (!r.satisfied) continue;
    ++ok;
    if (r.optimality && (!result.best_optimality || *r.optimality > *result.best_optimality)) {
      result.best_optimality = r.optimality;
    }
  }
  result.success_rate = result.repeats.empty() ? 0.0 : static_cast<double>(ok) / result.repeats.size();
}

// ---------------------------------------------------------------- suite

namespace {

struct Job {
  std::size_t instance;
  std::size_t repeat;
};

RepeatResult run_once(const InstanceFile& file, const InstanceResult& slot, std::size_t repeat,
                      const SuiteOptions& options) {
  RefinementInstance inst = file.instance;
  const std::uint64_t base = options.seed.value_or(inst.engine.seed);
  inst.engine.seed = base + repeat;
  if (options.strategy) inst.engine.subspace_strategy = inst.engine.assignment_strategy = *options.strategy;
  if (options.budget_seconds) inst.engine.budget_seconds = options.budget_seconds;

  RepeatResult r;
  r.repeat = repeat;
  r.seed = inst.engine.seed;
  const auto started = std::chrono::steady_clock::now();
  try {
    RefinementEngine engine(std::move(inst), options.transport);
    RunReport report = engine.run();
    r.satisfied = report.status == RunStatus::satisfied;
    if (report.best) {
      r.distance = report.best->distance;
      r.deviation = report.best->deviation;
      r.bounded_distance = engine.instance().distance.kind == DistanceKind::predicate_based
                               ? bounded_distance(engine.instance().distance, engine.query(), report.best->assignment)
                               : report.best->distance;
    }
    if (r.satisfied && r.bounded_distance) r.optimality = run_optimality(*r.bounded_distance, slot.delta_opt, slot.delta_max);
    r.refined_sql = report.refined_sql;
    r.iterations = report.iterations;
    r.samples = report.samples.size();
    r.executions = report.executions;
    r.tokens = report.tokens();
    if (options.log_dir) {
      std::ofstream(*options.log_dir / (file.name + "." + std::to_string(repeat) + ".jsonl")) << report.sample_log();
    }
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

}  // namespace

SuiteReport run_suite(const std::vector<fs::path>& paths, const SuiteOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  SuiteReport report;
  std::vector<std::optional<InstanceFile>> files(paths.size());
  std::vector<Job> jobs;
  if (options.log_dir) fs::create_directories(*options.log_dir);

  for (std::size_t i = 0; i < paths.size(); ++i) {
    InstanceResult res;
    res.path = paths[i].string();
    res.name = paths[i].stem().string();
    try {
      files[i] = InstanceFile::load(paths[i]);
      res.name = files[i]->name;
      res.instance_class = files[i]->meta.instance_class;
      res.delta_opt = files[i]->meta.delta_opt.value_or(0.0);
      res.delta_max = files[i]->instance.distance.max_distance(parse_query(files[i]->instance.query));
      res.repeats.resize(options.repeats);
      for (std::size_t k = 0; k < options.repeats; ++k) jobs.push_back({i, k});
    } catch (const Error& e) {
      files[i].reset();
      res.repeats.clear();
      res.error = e.what();
    }
    report.instances.push_back(std::move(res));
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      const Job job = jobs[j];
      auto& slot = report.instances[job.instance];
      slot.repeats[job.repeat] = run_once(*files[job.instance], slot, job.repeat, options);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, jobs.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::map<std::string, std::vector<const InstanceResult*>> by_class;
  for (auto& res : report.instances) {
    score_instance(res);
    for (const auto& r : res.repeats) {
      ++report.runs;
      if (r.satisfied) ++report.satisfied_runs;
      report.tokens += r.tokens;
    }
    by_class[res.instance_class.empty() ? "unspecified" : res.instance_class].push_back(&res);
  }
  for (const auto& [name, members] : by_class) {
    ClassAggregate agg;
    agg.instance_class = name;
    agg.instances = members.size();
    double rate = 0, opt = 0;
    std::size_t with_opt = 0;
    for (const auto* m : members) {
      rate += m->success_rate;
      if (m->best_optimality) {
        opt += *m->best_optimality;
        ++with_opt;
      }
    }
    agg.success_rate = rate / members.size();
    if (with_opt) agg.best_optimality = opt / with_opt;
    report.classes.push_back(agg);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

nlohmann::ordered_json SuiteReport::to_json(bool include_timing) const {
  oj list = oj::array();
  for (const auto& res : instances) {
    oj repeats = oj::array();
    for (const auto& r : res.repeats) {
      oj row{{"repeat", r.repeat},
             {"seed", r.seed},
             {"status", r.satisfied ? "satisfied" : "unsatisfied"},
             {"distance", optional_json(r.distance)},
             {"bounded_distance", optional_json(r.bounded_distance)},
             {"deviation", optional_json(r.deviation)},
             {"optimality", optional_json(r.optimality)},
             {"refined_sql", r.refined_sql},
             {"iterations", r.iterations},
             {"samples", r.samples},
             {"executions", r.executions},
             {"tokens", tokens_json(r.tokens)}};
      if (include_timing) row["wall_seconds"] = r.wall_seconds;
      if (!r.error.empty()) row["error"] = r.error;
      repeats.push_back(std::move(row));
    }
    oj item{{"name", res.name},
            {"path", res.path},
            {"class", res.instance_class},
            {"delta_opt", res.delta_opt},
            {"delta_max", res.delta_max},
            {"success_rate", res.success_rate},
            {"best_optimality", optional_json(res.best_optimality)},
            {"repeats", std::move(repeats)}};
    if (!res.error.empty()) item["error"] = res.error;
    list.push_back(std::move(item));
  }
  oj classes_json = oj::array();
  for (const auto& c : classes) {
    classes_json.push_back({{"class", c.instance_class},
                            {"instances", c.instances},
                            {"success_rate", c.success_rate},
                            {"best_optimality", optional_json(c.best_optimality)}});
  }
  oj out{{"instances", std::move(list)},
         {"classes", std::move(classes_json)},
         {"runs", runs},
         {"satisfied_runs", satisfied_runs},
         {"tokens", tokens_json(tokens)}};
  if (include_timing) out["wall_seconds"] = wall_seconds;
  return out;
}

std::string SuiteReport::to_csv(bool include_timing) const {
  std::ostringstream out;
  out << "instance,class,repeat,seed,status,distance,bounded_distance,deviation,optimality,iterations,samples,"
         "executions,total_tokens";
  if (include_timing) out << ",wall_seconds";
  out << ",error\n";
  for (const auto& res : instances) {
    if (res.repeats.empty()) {
      out << csv_field(res.name) << ',' << res.instance_class << ",,,error,,,,,,,,";
      if (include_timing) out << ',';
      out << ',' << csv_field(res.error) << '\n';
      continue;
    }
    for (const auto& r : res.repeats) {
      out << csv_field(res.name) << ',' << res.instance_class << ',' << r.repeat << ',' << r.seed << ','
          << (r.error.empty() ? (r.satisfied ? "satisfied" : "unsatisfied") : "error") << ','
          << optional_number(r.distance) << ',' << optional_number(r.bounded_distance) << ','
          << optional_number(r.deviation) << ',' << optional_number(r.optimality) << ',' << r.iterations << ','
          << r.samples << ',' << r.executions << ',' << r.tokens.total_tokens;
      if (include_timing) out << ',' << number(r.wall_seconds);
      out << ',' << csv_field(r.error) << '\n';
    }
  }
  return out.str();
}

}  // namespace refinery
