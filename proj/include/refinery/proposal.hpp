#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "refinery/catalog.hpp"
#include "refinery/history.hpp"
#include "refinery/objectives.hpp"
#include "refinery/query_model.hpp"
#include "refinery/skyline.hpp"
#include "refinery/subspace.hpp"

namespace refinery {

struct ChatMessage {
  std::string role;
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct TokenUsage {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  std::uint64_t total_tokens = 0;

  TokenUsage& operator+=(const TokenUsage& other) noexcept {
    prompt_tokens += other.prompt_tokens;
    completion_tokens += other.completion_tokens;
    total_tokens += other.total_tokens;
    return *this;
  }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

// Prompt text that stays the same for a whole run.
struct InstanceBrief {
  std::string database;
  std::string query;
  std::string predicates;
  std::string constraints;
  std::string distance;
  double epsilon = 0;
  std::string domain;

  static InstanceBrief build(const DatabaseDescription& database, const ParsedQuery& query,
                             const ConstraintSpec& constraints, const DistanceSpec& distance, double epsilon,
                             const SubspaceDomain& domain);
};

// Named prompt templates with {{placeholder}} slots. The built-in set is
// compiled from assets/prompts.
class PromptTemplates {
 public:
  static const PromptTemplates& embedded();
  // Every *.txt file in `dir`; names missing there fall back to the built-in text.
  static PromptTemplates from_directory(const std::filesystem::path& dir);  // FileNotFound

  const std::string& get(std::string_view name) const;  // Error

 private:
  std::map<std::string, std::string, std::less<>> texts_;
};

// Substitutes every {{name}}. A placeholder without a value throws Error.
std::string fill_template(std::string_view text, const std::map<std::string, std::string>& values);

// What a proposal call may see. Subspace calls get summaries, assignment
// calls the local history of their target subspace.
struct ProposalContext {
  const ParsedQuery* query = nullptr;
  const SubspaceDomain* domain = nullptr;
  const InstanceBrief* brief = nullptr;
  const SkylineSet* skyline = nullptr;
  std::vector<SubspaceSummary> summaries;
  std::vector<EvaluatedAssignment> local_history;
  std::size_t iteration = 1;
  std::size_t rounds = 1;
  std::size_t sample = 1;
  std::size_t samples = 1;
};

std::vector<ChatMessage> build_subspace_prompt(const ProposalContext& ctx,
                                               const PromptTemplates& templates = PromptTemplates::embedded());
std::vector<ChatMessage> build_assignment_prompt(const ProposalContext& ctx, const Subspace& target,
                                                 const PromptTemplates& templates = PromptTemplates::embedded());
std::vector<ChatMessage> build_probe_prompt(const std::string& database, const ParsedQuery& query,
                                            const RefinablePredicate& predicate,
                                            const PromptTemplates& templates = PromptTemplates::embedded());

// The JSON object in a model reply. A surrounding code fence or prose is
// tolerated. Throws ParseError.
nlohmann::json extract_json_document(std::string_view content);

// {"ranges": [...]} with one entry per predicate, or an object keyed by
// predicate label. Numeric entries are {"lo", "hi"} or [lo, hi] (swapped
// endpoints are repaired); categorical entries are {"cmin", "cmax"} or a
// plain list meaning cmax. Unknown fields are ignored. Throws ParseError.
Subspace parse_subspace_document(const nlohmann::json& doc, const ParsedQuery& query);
// {"values": [...]} or an object keyed by predicate label. Throws ParseError.
Assignment parse_assignment_document(const nlohmann::json& doc, const ParsedQuery& query);

nlohmann::ordered_json subspace_document(const Subspace& subspace);
nlohmann::ordered_json assignment_document(const Assignment& assignment);

// One chat-completion round trip. post() returns the response body and
// throws WireError on transport failures and non-2xx statuses.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string post(const std::string& body) = 0;
};

class HttpChatTransport final : public ChatTransport {
 public:
  // `endpoint` is a full URL; a bare host gets /v1/chat/completions.
  HttpChatTransport(std::string endpoint, std::string api_key, int timeout_seconds = 120);
  std::string post(const std::string& body) override;

 private:
  std::string base_;
  std::string path_;
  std::string api_key_;
  int timeout_seconds_;
};

struct LlmSettings {
  std::string endpoint;  // REFINERY_LLM_ENDPOINT wins when set
  std::string model = "gpt-4o";
  double temperature = 0;
  double top_p = 0;
  std::size_t max_retries = 3;
  int timeout_seconds = 120;
  // Out-of-range assignments are retried instead of clamped.
  bool reject_out_of_range = false;
};

std::string resolve_endpoint(const LlmSettings& settings);  // SpecError when none is configured
std::string resolve_api_key();

struct ModelReply {
  std::string content;
  TokenUsage usage;
};

class ModelClient {
 public:
  ModelClient(LlmSettings settings, std::shared_ptr<ChatTransport> transport);

  nlohmann::ordered_json request_body(const std::vector<ChatMessage>& messages) const;
  ModelReply complete(const std::vector<ChatMessage>& messages);  // WireError
  // complete() followed by extract_json_document(). `raw` receives the reply text.
  nlohmann::json call_model(const std::vector<ChatMessage>& messages, std::string* raw = nullptr);

  const LlmSettings& settings() const noexcept { return settings_; }
  const TokenUsage& usage() const noexcept { return usage_; }
  std::size_t wire_calls() const noexcept { return wire_calls_; }

 private:
  LlmSettings settings_;
  std::shared_ptr<ChatTransport> transport_;
  TokenUsage usage_;
  std::size_t wire_calls_ = 0;
};

struct ProposalStats {
  std::size_t wire_calls = 0;
  std::size_t invalid_replies = 0;
  std::size_t wire_failures = 0;
  std::size_t fallbacks = 0;
  std::size_t repaired = 0;  // out-of-range answers clamped into range
  TokenUsage tokens;

  ProposalStats& operator+=(const ProposalStats& other) noexcept;
  nlohmann::ordered_json to_json() const;
};

// Produces subspaces and assignments for the refinement loop. Returned
// subspaces lie inside ctx.domain; returned assignments lie inside `target`.
class ProposalStrategy {
 public:
  virtual ~ProposalStrategy() = default;

  virtual std::string_view name() const noexcept = 0;
  virtual Subspace propose_subspace(const ProposalContext& ctx) = 0;
  virtual Assignment propose_assignment(const ProposalContext& ctx, const Subspace& target) = 0;
  // Guess for the [lo, hi] of a derived attribute whose probe could not be
  // rewritten. Only model-backed strategies answer.
  virtual std::optional<std::pair<double, double>> propose_bounds(const std::string& database,
                                                                  const ParsedQuery& query,
                                                                  const RefinablePredicate& predicate) {
    (void)database, (void)query, (void)predicate;
    return std::nullopt;
  }
  virtual ProposalStats stats() const { return {}; }
  // Upper bound on model calls one proposal may make.
  virtual std::size_t wire_calls_per_proposal() const noexcept { return 0; }
};

enum class StrategyKind { llm, uniform_random, scripted, local_search };

std::string to_string(StrategyKind kind);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::uniform_random;
  std::optional<std::uint64_t> seed;
  LlmSettings llm;
  // scripted: documents replayed in order; exhaustive enumerates the whole
  // domain once the scripted subspaces and assignments run out.
  std::vector<nlohmann::json> subspaces;
  std::vector<nlohmann::json> assignments;
  bool exhaustive = false;
  // local_search: step size as a fraction of the range width.
  double step = 0.1;
  std::optional<std::filesystem::path> prompt_dir;

  // A kind name or {"kind": ..., ...}.
  static StrategyConfig from_json(const nlohmann::json& doc);  // SpecError
  nlohmann::ordered_json to_json() const;
};

using TransportFactory = std::function<std::shared_ptr<ChatTransport>(const LlmSettings&)>;

// `default_seed` is used when the config carries none. Without a factory the
// llm kind talks HTTP to resolve_endpoint().
std::unique_ptr<ProposalStrategy> make_strategy(const StrategyConfig& config, std::uint64_t default_seed,
                                                TransportFactory transport = {});

class UniformRandomStrategy final : public ProposalStrategy {
 public:
  explicit UniformRandomStrategy(std::uint64_t seed) : rng_(seed) {}

  std::string_view name() const noexcept override { return "uniform_random"; }
  Subspace propose_subspace(const ProposalContext& ctx) override;
  Assignment propose_assignment(const ProposalContext& ctx, const Subspace& target) override;

  // A random sub-interval or sub-set pair of every domain range.
  Subspace draw_subspace(const SubspaceDomain& domain);

 private:
  std::mt19937_64 rng_;
};

class ScriptedStrategy final : public ProposalStrategy {
 public:
  ScriptedStrategy(std::vector<nlohmann::json> subspaces, std::vector<nlohmann::json> assignments, bool exhaustive,
                   std::uint64_t seed);

  std::string_view name() const noexcept override { return "scripted"; }
  Subspace propose_subspace(const ProposalContext& ctx) override;
  Assignment propose_assignment(const ProposalContext& ctx, const Subspace& target) override;
  ProposalStats stats() const override { return stats_; }

 private:
  std::optional<Assignment> next_enumerated(const SubspaceDomain& domain, const Subspace& target);

  std::vector<nlohmann::json> subspaces_;
  std::vector<nlohmann::json> assignments_;
  bool exhaustive_;
  std::size_t next_subspace_ = 0;
  std::size_t next_assignment_ = 0;
  std::optional<std::vector<Assignment>> enumeration_;
  std::size_t cursor_ = 0;
  UniformRandomStrategy fallback_;
  ProposalStats stats_;
};

class LocalSearchStrategy final : public ProposalStrategy {
 public:
  LocalSearchStrategy(std::uint64_t seed, double step) : rng_(seed), step_(step) {}

  std::string_view name() const noexcept override { return "local_search"; }
  Subspace propose_subspace(const ProposalContext& ctx) override;
  Assignment propose_assignment(const ProposalContext& ctx, const Subspace& target) override;

 private:
  Assignment mutate(const Assignment& from, const Subspace& target);

  std::mt19937_64 rng_;
  double step_;
};

class LlmStrategy final : public ProposalStrategy {
 public:
  LlmStrategy(LlmSettings settings, std::shared_ptr<ChatTransport> transport, std::uint64_t seed,
              PromptTemplates templates = PromptTemplates::embedded());

  std::string_view name() const noexcept override { return "llm"; }
  Subspace propose_subspace(const ProposalContext& ctx) override;
  Assignment propose_assignment(const ProposalContext& ctx, const Subspace& target) override;
  std::optional<std::pair<double, double>> propose_bounds(const std::string& database, const ParsedQuery& query,
                                                          const RefinablePredicate& predicate) override;
  ProposalStats stats() const override;
  std::size_t wire_calls_per_proposal() const noexcept override { return client_.settings().max_retries + 1; }

  const ModelClient& client() const noexcept { return client_; }

 private:
  // Runs the conversation until `accept` returns without ParseError, at most
  // max_retries + 1 wire calls.
  template <typename T, typename Accept>
  std::optional<T> converse(std::vector<ChatMessage> messages, Accept&& accept);

  ModelClient client_;
  PromptTemplates templates_;
  UniformRandomStrategy fallback_;
  ProposalStats stats_;
};

}  // namespace refinery
