#include "refinery/proposal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "refinery/errors.hpp"
#include "refinery/stats.hpp"

namespace refinery {

namespace detail {
const std::map<std::string, std::string>& embedded_prompts();  // generated from assets/prompts
}

namespace {

using oj = nlohmann::ordered_json;

// Compact JSON, one array element per line.
std::string json_lines(const oj& array) {
  if (!array.is_array() || array.empty()) return "[]";
  std::string out = "[\n";
  for (std::size_t i = 0; i < array.size(); ++i) {
    out += "  " + array[i].dump();
    out += i + 1 < array.size() ? ",\n" : "\n";
  }
  return out + "]";
}

std::string squash(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

// Binds the entries of a label-keyed object to predicates.
std::vector<const nlohmann::json*> bind_by_label(const nlohmann::json& obj, const ParsedQuery& query) {
  const auto labels = predicate_labels(query);
  std::vector<const nlohmann::json*> out(query.predicates.size(), nullptr);
  for (std::size_t i = 0; i < query.predicates.size(); ++i) {
    const auto& attr = query.predicates[i].attribute;
    const bool attr_unique = std::count_if(query.predicates.begin(), query.predicates.end(),
                                           [&](const RefinablePredicate& p) { return squash(p.attribute) == squash(attr); }) == 1;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const auto key = squash(it.key());
      if (key == squash(labels[i]) || (attr_unique && key == squash(attr))) {
        out[i] = &it.value();
        break;
      }
    }
    if (!out[i]) throw ParseError("no entry for predicate '" + labels[i] + "'");
  }
  return out;
}

std::vector<const nlohmann::json*> per_predicate(const nlohmann::json& doc, const ParsedQuery& query,
                                                 std::initializer_list<const char*> wrappers) {
  if (!doc.is_object()) throw ParseError("expected a JSON object");
  const nlohmann::json* body = &doc;
  for (const char* w : wrappers) {
    if (auto it = doc.find(w); it != doc.end()) {
      body = &*it;
      break;
    }
  }
  if (body->is_array()) {
    if (body->size() != query.predicates.size()) {
      throw ParseError("expected " + std::to_string(query.predicates.size()) + " entries, got " +
                       std::to_string(body->size()));
    }
    std::vector<const nlohmann::json*> out;
    for (const auto& e : *body) out.push_back(&e);
    return out;
  }
  if (body->is_object()) return bind_by_label(*body, query);
  throw ParseError("expected a list or an object of per-predicate entries");
}

double number_field(const nlohmann::json& v, const std::string& what) {
  if (!v.is_number()) throw ParseError(what + " must be a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) throw ParseError(what + " must be finite");
  return x;
}

const nlohmann::json* first_field(const nlohmann::json& obj, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (auto it = obj.find(n); it != obj.end()) return &*it;
  }
  return nullptr;
}

CategoricalSet string_set(const nlohmann::json& v, const std::string& what) {
  CategoricalSet out;
  if (v.is_string()) {
    out.insert(v.get<std::string>());
    return out;
  }
  if (!v.is_array()) throw ParseError(what + " must be a list of values");
  for (const auto& e : v) {
    if (!e.is_string()) throw ParseError(what + " must hold strings only");
    out.insert(e.get<std::string>());
  }
  return out;
}

std::string trim_trailing(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
  return s;
}

// One line per table header and per attribute.
std::string render_database(const DatabaseDescription& database) {
  std::string out;
  for (const auto& t : database.to_json()) {
    out += "Table " + t["table"].get<std::string>();
    if (t.contains("primary_key") && t["primary_key"].is_string()) out += ", primary key " + t["primary_key"].get<std::string>();
    out += ", " + std::to_string(t["row_count"].get<std::size_t>()) + " rows\n";
    if (t.contains("foreign_keys")) out += "  foreign keys: " + t["foreign_keys"].dump() + "\n";
    for (auto it = t["attributes"].begin(); it != t["attributes"].end(); ++it) {
      out += "  " + it.key() + ": " + it.value().dump() + "\n";
    }
  }
  return trim_trailing(std::move(out));
}

std::string literal_text(const RefinablePredicate& p) { return p.attribute + " " + to_string(p.op) + " " + format_literal(p.literal); }

double epsilon_of(const ProposalContext& ctx) {
  if (ctx.skyline) return ctx.skyline->epsilon();
  return ctx.brief ? ctx.brief->epsilon : 0;
}

void require(const ProposalContext& ctx) {
  if (!ctx.query || !ctx.domain) throw Error("proposal context lacks the query or the domain");
}

}  // namespace

// ---------------------------------------------------------------- templates

InstanceBrief InstanceBrief::build(const DatabaseDescription& database, const ParsedQuery& query,
                                   const ConstraintSpec& constraints, const DistanceSpec& distance, double epsilon,
                                   const SubspaceDomain& domain) {
  InstanceBrief b;
  b.database = render_database(database);
  b.query = query.original_sql;
  for (const auto& p : query.predicates) {
    b.predicates += std::to_string(p.id + 1) + ". " + literal_text(p) + "  (" + to_string(p.clause) + ", " +
                    (p.value_kind() == ValueKind::numeric ? "numeric" : "categorical") + ")\n";
  }
  if (!b.predicates.empty()) b.predicates.pop_back();
  b.constraints = trim_trailing(constraints.render_code());
  b.distance = trim_trailing(distance.render_code());
  b.epsilon = epsilon;
  b.domain = json_lines(domain.to_json(query));
  return b;
}

const PromptTemplates& PromptTemplates::embedded() {
  static const PromptTemplates t = [] {
    PromptTemplates p;
    for (const auto& [k, v] : detail::embedded_prompts()) p.texts_.emplace(k, v);
    return p;
  }();
  return t;
}

PromptTemplates PromptTemplates::from_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FileNotFound("prompt directory not found: " + dir.string());
  PromptTemplates p = embedded();
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".txt") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    p.texts_[e.path().stem().string()] = ss.str();
  }
  return p;
}

const std::string& PromptTemplates::get(std::string_view name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw Error("no prompt template named '" + std::string(name) + "'");
  return it->second;
}

std::string fill_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    const std::string name(text.substr(open + 2, close - open - 2));
    auto it = values.find(name);
    if (it == values.end()) throw Error("template placeholder {{" + name + "}} has no value");
    out += it->second;
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

// ---------------------------------------------------------------- prompts

namespace {

std::string render_brief(const InstanceBrief& b, const PromptTemplates& t) {
  return fill_template(t.get("instance_brief"), {{"database", b.database},
                                                 {"query", b.query},
                                                 {"predicates", b.predicates},
                                                 {"epsilon", format_number(b.epsilon)},
                                                 {"constraints", b.constraints},
                                                 {"distance", b.distance},
                                                 {"domain", b.domain}});
}

std::string render_skyline(const ProposalContext& ctx) {
  if (!ctx.skyline || ctx.skyline->points().empty()) return "(empty: no prior attempts)";
  return json_lines(ctx.skyline->to_json());
}

std::vector<ChatMessage> wrap(const PromptTemplates& t, std::string body) {
  auto system = t.get("system");
  while (!system.empty() && system.back() == '\n') system.pop_back();
  while (!body.empty() && body.back() == '\n') body.pop_back();
  return {{"system", std::move(system)}, {"user", std::move(body)}};
}

}  // namespace

std::vector<ChatMessage> build_subspace_prompt(const ProposalContext& ctx, const PromptTemplates& t) {
  require(ctx);
  if (!ctx.brief) throw Error("proposal context lacks the instance brief");
  std::string summaries = ctx.summaries.empty() ? "(none: no prior attempts)"
                                                : json_lines(summaries_to_json(ctx.summaries, *ctx.query));
  return wrap(t, fill_template(t.get("subspace_prompt"),
                               {{"brief", render_brief(*ctx.brief, t)},
                                {"epsilon", format_number(epsilon_of(ctx))},
                                {"skyline", render_skyline(ctx)},
                                {"summaries", summaries},
                                {"iteration", std::to_string(ctx.iteration)},
                                {"rounds", std::to_string(ctx.rounds)},
                                {"samples", std::to_string(ctx.samples)},
                                {"subspace_example", subspace_document(ctx.domain->as_subspace()).dump()}}));
}

std::vector<ChatMessage> build_assignment_prompt(const ProposalContext& ctx, const Subspace& target,
                                                 const PromptTemplates& t) {
  require(ctx);
  if (!ctx.brief) throw Error("proposal context lacks the instance brief");
  std::string history = "(none: no samples yet)";
  if (!ctx.local_history.empty()) {
    oj rows = oj::array();
    for (const auto& e : ctx.local_history) {
      rows.push_back({{"sample", e.sample_index},
                      {"vals", assignment_to_json(e.assignment)},
                      {"dev", stats::round_to(e.deviation, 4)},
                      {"dist", stats::round_to(e.distance, 4)}});
    }
    history = json_lines(rows);
  }
  const Assignment example = clamp_into(target, baseline_assignment(*ctx.query));
  return wrap(t, fill_template(t.get("assignment_prompt"),
                               {{"brief", render_brief(*ctx.brief, t)},
                                {"epsilon", format_number(epsilon_of(ctx))},
                                {"skyline", render_skyline(ctx)},
                                {"subspace", to_json(target, *ctx.query).dump()},
                                {"local_history", history},
                                {"sample", std::to_string(ctx.sample)},
                                {"samples", std::to_string(ctx.samples)},
                                {"assignment_example", assignment_document(example).dump()}}));
}

std::vector<ChatMessage> build_probe_prompt(const std::string& database, const ParsedQuery& query,
                                            const RefinablePredicate& predicate, const PromptTemplates& t) {
  return wrap(t, fill_template(t.get("probe_prompt"), {{"database", database},
                                                       {"query", query.original_sql},
                                                       {"attribute", predicate.attribute},
                                                       {"operator", to_string(predicate.op)},
                                                       {"literal", format_literal(predicate.literal)}}));
}

// ---------------------------------------------------------------- documents

nlohmann::json extract_json_document(std::string_view content) {
  std::string_view s = content;
  auto trim = [](std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return v;
  };
  s = trim(s);
  if (s.substr(0, 3) == "```") {
    auto nl = s.find('\n');
    s = nl == std::string_view::npos ? std::string_view{} : s.substr(nl + 1);
    if (auto fence = s.rfind("```"); fence != std::string_view::npos) s = s.substr(0, fence);
    s = trim(s);
  }
  auto doc = nlohmann::json::parse(s, nullptr, false);
  if (doc.is_discarded()) {
    auto open = s.find('{');
    auto close = s.rfind('}');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
      doc = nlohmann::json::parse(s.substr(open, close - open + 1), nullptr, false);
    }
  }
  if (doc.is_discarded()) throw ParseError("the reply is not a JSON document");
  if (!doc.is_object()) throw ParseError("the reply must be a JSON object");
  return doc;
}

Subspace parse_subspace_document(const nlohmann::json& doc, const ParsedQuery& query) {
  const auto entries = per_predicate(doc, query, {"ranges", "subspace"});
  const auto labels = predicate_labels(query);
  Subspace out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = *entries[i];
    const std::string what = "range for '" + labels[i] + "'";
    if (query.predicates[i].value_kind() == ValueKind::numeric) {
      double lo = 0, hi = 0;
      if (e.is_array()) {
        if (e.size() != 2) throw ParseError(what + " must have two endpoints");
        lo = number_field(e[0], what + " lower endpoint");
        hi = number_field(e[1], what + " upper endpoint");
      } else if (e.is_object()) {
        const auto* l = first_field(e, {"lo", "min", "min_val"});
        const auto* h = first_field(e, {"hi", "max", "max_val"});
        if (!l || !h) throw ParseError(what + " needs \"lo\" and \"hi\"");
        lo = number_field(*l, what + " lo");
        hi = number_field(*h, what + " hi");
      } else {
        throw ParseError(what + " must be {\"lo\": .., \"hi\": ..}");
      }
      if (lo > hi) std::swap(lo, hi);
      out.ranges.emplace_back(NumericRange{lo, hi, false});
    } else {
      CategoricalRange r;
      if (e.is_array()) {
        r.cmax = string_set(e, what);
      } else if (e.is_object()) {
        const auto* mn = first_field(e, {"cmin"});
        const auto* mx = first_field(e, {"cmax"});
        if (!mx) throw ParseError(what + " needs \"cmax\"");
        r.cmax = string_set(*mx, what + " cmax");
        if (mn) r.cmin = string_set(*mn, what + " cmin");
        r.cmax.insert(r.cmin.begin(), r.cmin.end());
      } else {
        throw ParseError(what + " must be {\"cmin\": [..], \"cmax\": [..]}");
      }
      out.ranges.emplace_back(std::move(r));
    }
  }
  return out;
}

Assignment parse_assignment_document(const nlohmann::json& doc, const ParsedQuery& query) {
  const auto entries = per_predicate(doc, query, {"values", "assignment"});
  const auto labels = predicate_labels(query);
  Assignment out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string what = "value for '" + labels[i] + "'";
    if (query.predicates[i].value_kind() == ValueKind::numeric) {
      out.values.emplace_back(number_field(*entries[i], what));
    } else {
      out.values.emplace_back(string_set(*entries[i], what));
    }
  }
  return out;
}

nlohmann::ordered_json subspace_document(const Subspace& subspace) {
  oj ranges = oj::array();
  for (const auto& r : subspace.ranges) {
    if (const auto* n = std::get_if<NumericRange>(&r)) {
      ranges.push_back({{"lo", n->lo}, {"hi", n->hi}});
    } else {
      const auto& c = std::get<CategoricalRange>(r);
      ranges.push_back({{"cmin", c.cmin}, {"cmax", c.cmax}});
    }
  }
  return {{"ranges", std::move(ranges)}};
}

nlohmann::ordered_json assignment_document(const Assignment& assignment) {
  return {{"values", assignment_to_json(assignment)}};
}

// ---------------------------------------------------------------- config

ProposalStats& ProposalStats::operator+=(const ProposalStats& o) noexcept {
  wire_calls += o.wire_calls;
  invalid_replies += o.invalid_replies;
  wire_failures += o.wire_failures;
  fallbacks += o.fallbacks;
  repaired += o.repaired;
  tokens += o.tokens;
  return *this;
}

nlohmann::ordered_json ProposalStats::to_json() const {
  return {{"wire_calls", wire_calls},
          {"invalid_replies", invalid_replies},
          {"wire_failures", wire_failures},
          {"fallbacks", fallbacks},
          {"repaired", repaired},
          {"tokens",
           {{"prompt", tokens.prompt_tokens}, {"completion", tokens.completion_tokens}, {"total", tokens.total_tokens}}}};
}

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::llm: return "llm";
    case StrategyKind::uniform_random: return "uniform_random";
    case StrategyKind::scripted: return "scripted";
    case StrategyKind::local_search: return "local_search";
  }
  return "?";
}

StrategyConfig StrategyConfig::from_json(const nlohmann::json& doc) {
  StrategyConfig c;
  auto kind_of = [](const std::string& s) {
    if (s == "llm") return StrategyKind::llm;
    if (s == "uniform_random" || s == "random") return StrategyKind::uniform_random;
    if (s == "scripted") return StrategyKind::scripted;
    if (s == "local_search" || s == "local-search") return StrategyKind::local_search;
    throw SpecError("unknown strategy kind '" + s + "'");
  };
  if (doc.is_string()) {
    c.kind = kind_of(doc.get<std::string>());
    return c;
  }
  if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string()) {
    throw SpecError("strategy must be a kind name or an object with \"kind\"");
  }
  try {
    c.kind = kind_of(doc["kind"].get<std::string>());
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    c.llm.endpoint = doc.value("endpoint", c.llm.endpoint);
    c.llm.model = doc.value("model", c.llm.model);
    c.llm.temperature = doc.value("temperature", c.llm.temperature);
    c.llm.top_p = doc.value("top_p", c.llm.top_p);
    c.llm.max_retries = doc.value("max_retries", c.llm.max_retries);
    c.llm.timeout_seconds = doc.value("timeout_seconds", c.llm.timeout_seconds);
    const std::string repair = doc.value("out_of_range", std::string("clamp"));
    if (repair != "clamp" && repair != "reject") throw SpecError("out_of_range must be \"clamp\" or \"reject\"");
    c.llm.reject_out_of_range = repair == "reject";
    if (doc.contains("subspaces")) c.subspaces = doc["subspaces"].get<std::vector<nlohmann::json>>();
    if (doc.contains("assignments")) c.assignments = doc["assignments"].get<std::vector<nlohmann::json>>();
    c.exhaustive = doc.value("exhaustive", false);
    c.step = doc.value("step", c.step);
    if (doc.contains("prompt_dir")) c.prompt_dir = doc["prompt_dir"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("bad strategy config: ") + e.what());
  }
  if (!(c.step > 0 && c.step <= 1)) throw SpecError("local_search step must be in (0, 1]");
  return c;
}

nlohmann::ordered_json StrategyConfig::to_json() const {
  oj out{{"kind", refinery::to_string(kind)}};
  if (seed) out["seed"] = *seed;
  switch (kind) {
    case StrategyKind::llm:
      out["model"] = llm.model;
      if (!llm.endpoint.empty()) out["endpoint"] = llm.endpoint;
      out["temperature"] = llm.temperature;
      out["top_p"] = llm.top_p;
      out["max_retries"] = llm.max_retries;
      out["timeout_seconds"] = llm.timeout_seconds;
      out["out_of_range"] = llm.reject_out_of_range ? "reject" : "clamp";
      break;
    case StrategyKind::scripted:
      out["subspaces"] = subspaces;
      out["assignments"] = assignments;
      out["exhaustive"] = exhaustive;
      break;
    case StrategyKind::local_search: out["step"] = step; break;
    case StrategyKind::uniform_random: break;
  }
  if (prompt_dir) out["prompt_dir"] = prompt_dir->string();
  return out;
}

std::unique_ptr<ProposalStrategy> make_strategy(const StrategyConfig& config, std::uint64_t default_seed,
                                                TransportFactory transport) {
  const std::uint64_t seed = config.seed.value_or(default_seed);
  switch (config.kind) {
    case StrategyKind::uniform_random: return std::make_unique<UniformRandomStrategy>(seed);
    case StrategyKind::scripted:
      return std::make_unique<ScriptedStrategy>(config.subspaces, config.assignments, config.exhaustive, seed);
    case StrategyKind::local_search: return std::make_unique<LocalSearchStrategy>(seed, config.step);
    case StrategyKind::llm: {
      std::shared_ptr<ChatTransport> t;
      if (transport) {
        t = transport(config.llm);
      } else {
        t = std::make_shared<HttpChatTransport>(resolve_endpoint(config.llm), resolve_api_key(),
                                                config.llm.timeout_seconds);
      }
      PromptTemplates templates =
          config.prompt_dir ? PromptTemplates::from_directory(*config.prompt_dir) : PromptTemplates::embedded();
      return std::make_unique<LlmStrategy>(config.llm, std::move(t), seed, std::move(templates));
    }
  }
  throw SpecError("unknown strategy kind");
}

// ---------------------------------------------------------------- uniform

Subspace UniformRandomStrategy::draw_subspace(const SubspaceDomain& domain) {
  Subspace out;
  for (const auto& e : domain.entries) {
    if (const auto* n = std::get_if<NumericRange>(&e.range)) {
      NumericRange r = *n;
      const double ilo = std::ceil(n->lo), ihi = std::floor(n->hi);
      if (n->integral && ilo <= ihi) {
        std::uniform_int_distribution<std::int64_t> d(static_cast<std::int64_t>(ilo), static_cast<std::int64_t>(ihi));
        double a = static_cast<double>(d(rng_)), b = static_cast<double>(d(rng_));
        r.lo = std::min(a, b);
        r.hi = std::max(a, b);
      } else if (n->lo < n->hi) {
        std::uniform_real_distribution<double> d(n->lo, n->hi);
        double a = d(rng_), b = d(rng_);
        r.lo = std::min(a, b);
        r.hi = std::max(a, b);
      }
      out.ranges.emplace_back(r);
    } else {
      const auto& c = std::get<CategoricalRange>(e.range);
      CategoricalRange r{c.cmin, c.cmin};
      for (const auto& v : c.cmax) {
        if (!c.cmin.count(v) && (rng_() & 1u)) r.cmax.insert(v);
      }
      for (const auto& v : r.cmax) {
        if (!c.cmin.count(v) && (rng_() & 3u) == 0) r.cmin.insert(v);
      }
      out.ranges.emplace_back(std::move(r));
    }
  }
  return out;
}

Subspace UniformRandomStrategy::propose_subspace(const ProposalContext& ctx) {
  require(ctx);
  if (ctx.domain->entries.empty()) throw StrategyExhausted("the subspace domain is empty");
  return draw_subspace(*ctx.domain);
}

Assignment UniformRandomStrategy::propose_assignment(const ProposalContext&, const Subspace& target) {
  try {
    return sample_within(target, rng_);
  } catch (const EmptyRange& e) {
    throw StrategyExhausted(std::string("cannot sample the subspace: ") + e.what());
  }
}

// ---------------------------------------------------------------- scripted

ScriptedStrategy::ScriptedStrategy(std::vector<nlohmann::json> subspaces, std::vector<nlohmann::json> assignments,
                                   bool exhaustive, std::uint64_t seed)
    : subspaces_(std::move(subspaces)), assignments_(std::move(assignments)), exhaustive_(exhaustive), fallback_(seed) {}

Subspace ScriptedStrategy::propose_subspace(const ProposalContext& ctx) {
  require(ctx);
  if (next_subspace_ < subspaces_.size()) {
    return clamp_to_domain(*ctx.domain, parse_subspace_document(subspaces_[next_subspace_++], *ctx.query));
  }
  if (exhaustive_) return ctx.domain->as_subspace();
  ++stats_.fallbacks;
  return fallback_.propose_subspace(ctx);
}

Assignment ScriptedStrategy::propose_assignment(const ProposalContext& ctx, const Subspace& target) {
  require(ctx);
  if (next_assignment_ < assignments_.size()) {
    Assignment a = parse_assignment_document(assignments_[next_assignment_++], *ctx.query);
    if (!contains(target, a)) {
      ++stats_.repaired;
      a = clamp_into(target, a);
    }
    return a;
  }
  if (exhaustive_) {
    if (auto a = next_enumerated(*ctx.domain, target)) return *a;
  }
  ++stats_.fallbacks;
  return fallback_.propose_assignment(ctx, target);
}

std::optional<Assignment> ScriptedStrategy::next_enumerated(const SubspaceDomain& domain, const Subspace& target) {
  if (!enumeration_) {
    enumeration_ = enumerate_assignments(domain.as_subspace(), 5'000'000);
    if (!enumeration_) {
      throw InstanceError("exhaustive enumeration needs a finite domain of integer and categorical ranges");
    }
  }
  while (cursor_ < enumeration_->size()) {
    const Assignment& a = (*enumeration_)[cursor_++];
    if (contains(target, a)) return a;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- local search

namespace {

// Satisfying samples first by distance, then the rest by deviation.
bool better(const EvaluatedAssignment& a, const EvaluatedAssignment& b, double eps) {
  const bool sa = is_satisfying(a.deviation, eps), sb = is_satisfying(b.deviation, eps);
  if (sa != sb) return sa;
  if (sa) return a.distance < b.distance || (a.distance == b.distance && a.deviation < b.deviation);
  return a.deviation < b.deviation || (a.deviation == b.deviation && a.distance < b.distance);
}

}  // namespace

Subspace LocalSearchStrategy::propose_subspace(const ProposalContext& ctx) {
  require(ctx);
  Subspace full = ctx.domain->as_subspace();
  if (!ctx.skyline || ctx.skyline->points().empty()) return full;
  const auto& pts = ctx.skyline->points();
  const double eps = ctx.skyline->epsilon();
  auto anchor = std::find_if(pts.begin(), pts.end(), [&](const SkylinePoint& p) { return is_satisfying(p.deviation, eps); });
  const SkylinePoint& a = anchor != pts.end() ? *anchor : pts.back();
  const double radius = std::max(0.05, 0.5 * std::pow(0.7, static_cast<double>(ctx.iteration) - 1));
  for (std::size_t i = 0; i < full.ranges.size(); ++i) {
    auto* n = std::get_if<NumericRange>(&full.ranges[i]);
    if (!n) continue;
    const double c = std::get<double>(a.assignment.values[i]);
    const double w = (n->hi - n->lo) * radius;
    n->lo = std::max(n->lo, c - w);
    n->hi = std::min(n->hi, c + w);
  }
  return clamp_to_domain(*ctx.domain, full);
}

Assignment LocalSearchStrategy::mutate(const Assignment& from, const Subspace& target) {
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < target.ranges.size(); ++i) {
    if (const auto* n = std::get_if<NumericRange>(&target.ranges[i])) {
      if (n->lo < n->hi) free.push_back(i);
    } else {
      const auto& c = std::get<CategoricalRange>(target.ranges[i]);
      if (c.cmax.size() > c.cmin.size()) free.push_back(i);
    }
  }
  if (free.empty()) return from;
  Assignment out = from;
  const std::size_t i = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng_)];
  if (const auto* n = std::get_if<NumericRange>(&target.ranges[i])) {
    double delta = step_ * (n->hi - n->lo) * std::uniform_real_distribution<double>(0.05, 1.0)(rng_);
    if (n->integral) delta = std::max(1.0, std::round(delta));
    if (rng_() & 1u) delta = -delta;
    out.values[i] = std::get<double>(from.values[i]) + delta;
  } else {
    const auto& c = std::get<CategoricalRange>(target.ranges[i]);
    std::vector<std::string> optional;
    for (const auto& v : c.cmax) {
      if (!c.cmin.count(v)) optional.push_back(v);
    }
    const auto& v = optional[std::uniform_int_distribution<std::size_t>(0, optional.size() - 1)(rng_)];
    auto s = std::get<CategoricalSet>(from.values[i]);
    if (!s.erase(v)) s.insert(v);
    out.values[i] = std::move(s);
  }
  return clamp_into(target, out);
}

Assignment LocalSearchStrategy::propose_assignment(const ProposalContext& ctx, const Subspace& target) {
  require(ctx);
  const double eps = epsilon_of(ctx);
  std::set<std::string> seen;
  const EvaluatedAssignment* best = nullptr;
  for (const auto& e : ctx.local_history) {
    seen.insert(canonical_key(e.assignment));
    if (contains(target, e.assignment) && (!best || better(e, *best, eps))) best = &e;
  }
  Assignment base;
  if (best) {
    base = best->assignment;
  } else {
    base = clamp_into(target, baseline_assignment(*ctx.query));
    if (!seen.count(canonical_key(base))) return base;
  }
  for (int attempt = 0; attempt < 32; ++attempt) {
    Assignment c = mutate(base, target);
    if (!seen.count(canonical_key(c))) return c;
  }
  try {
    return sample_within(target, rng_);
  } catch (const EmptyRange& e) {
    throw StrategyExhausted(std::string("cannot sample the subspace: ") + e.what());
  }
}

}  // namespace refinery
