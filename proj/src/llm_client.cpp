#include <httplib.h>

#include <cmath>
#include <cstdlib>

#include "refinery/errors.hpp"
#include "refinery/proposal.hpp"

namespace refinery {

namespace {

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

std::string snippet(const std::string& body) { return body.size() > 200 ? body.substr(0, 200) + "..." : body; }

}  // namespace

std::string resolve_endpoint(const LlmSettings& settings) {
  if (auto e = env("REFINERY_LLM_ENDPOINT"); !e.empty()) return e;
  if (!settings.endpoint.empty()) return settings.endpoint;
  throw SpecError("no model endpoint configured; set REFINERY_LLM_ENDPOINT");
}

std::string resolve_api_key() { return env("REFINERY_LLM_API_KEY"); }

HttpChatTransport::HttpChatTransport(std::string endpoint, std::string api_key, int timeout_seconds)
    : api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
  if (endpoint.find("://") == std::string::npos) endpoint = "http://" + endpoint;
  const auto host_start = endpoint.find("://") + 3;
  const auto slash = endpoint.find('/', host_start);
  if (slash == std::string::npos) {
    base_ = endpoint;
    path_ = "/";
  } else {
    base_ = endpoint.substr(0, slash);
    path_ = endpoint.substr(slash);
  }
  if (path_ == "/") path_ = "/v1/chat/completions";
}

std::string HttpChatTransport::post(const std::string& body) {
  httplib::Client client(base_);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  client.set_write_timeout(timeout_seconds_, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) throw WireError("request to " + base_ + path_ + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw WireError("HTTP " + std::to_string(res->status) + " from " + base_ + path_ + ": " + snippet(res->body),
                    res->status);
  }
  return res->body;
}

ModelClient::ModelClient(LlmSettings settings, std::shared_ptr<ChatTransport> transport)
    : settings_(std::move(settings)), transport_(std::move(transport)) {
  if (!transport_) throw Error("model client needs a transport");
}

nlohmann::ordered_json ModelClient::request_body(const std::vector<ChatMessage>& messages) const {
  nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", settings_.model},
          {"messages", std::move(msgs)},
          {"temperature", settings_.temperature},
          {"top_p", settings_.top_p}};
}

ModelReply ModelClient::complete(const std::vector<ChatMessage>& messages) {
  ++wire_calls_;
  const std::string text = transport_->post(request_body(messages).dump());
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw WireError("completion response is not a JSON object", 200);
  ModelReply reply;
  if (auto u = doc.find("usage"); u != doc.end() && u->is_object()) {
    auto count = [&](const char* k) -> std::uint64_t {
      auto it = u->find(k);
      return it != u->end() && it->is_number_unsigned() ? it->get<std::uint64_t>() : 0;
    };
    reply.usage.prompt_tokens = count("prompt_tokens");
    reply.usage.completion_tokens = count("completion_tokens");
    reply.usage.total_tokens = count("total_tokens");
    if (reply.usage.total_tokens == 0) reply.usage.total_tokens = reply.usage.prompt_tokens + reply.usage.completion_tokens;
    usage_ += reply.usage;
  }
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty() || !(*choices)[0].is_object()) {
    throw WireError("completion response has no choices", 200);
  }
  const auto& message = (*choices)[0].value("message", nlohmann::json::object());
  if (!message.is_object() || !message.contains("content") || !message["content"].is_string()) {
    throw WireError("completion response has no choices[0].message.content", 200);
  }
  reply.content = message["content"].get<std::string>();
  return reply;
}

nlohmann::json ModelClient::call_model(const std::vector<ChatMessage>& messages, std::string* raw) {
  ModelReply reply = complete(messages);
  if (raw) *raw = reply.content;
  return extract_json_document(reply.content);
}

LlmStrategy::LlmStrategy(LlmSettings settings, std::shared_ptr<ChatTransport> transport, std::uint64_t seed,
                         PromptTemplates templates)
    : client_(std::move(settings), std::move(transport)), templates_(std::move(templates)), fallback_(seed) {}

template <typename T, typename Accept>
std::optional<T> LlmStrategy::converse(std::vector<ChatMessage> messages, Accept&& accept) {
  const std::size_t attempts = client_.settings().max_retries + 1;
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    std::string raw;
    try {
      auto doc = client_.call_model(messages, &raw);
      try {
        return accept(doc);
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw ParseError(e.what());
      }
    } catch (const ParseError& e) {
      ++stats_.invalid_replies;
      messages.push_back({"assistant", raw});
      messages.push_back({"user", fill_template(templates_.get("retry_feedback"), {{"error", e.what()}})});
    } catch (const WireError&) {
      ++stats_.wire_failures;
    }
  }
  return std::nullopt;
}

Subspace LlmStrategy::propose_subspace(const ProposalContext& ctx) {
  if (!ctx.query || !ctx.domain) throw Error("proposal context lacks the query or the domain");
  auto s = converse<Subspace>(build_subspace_prompt(ctx, templates_), [&](const nlohmann::json& doc) {
    return clamp_to_domain(*ctx.domain, parse_subspace_document(doc, *ctx.query));
  });
  if (s) return *s;
  ++stats_.fallbacks;
  return fallback_.propose_subspace(ctx);
}

Assignment LlmStrategy::propose_assignment(const ProposalContext& ctx, const Subspace& target) {
  if (!ctx.query || !ctx.domain) throw Error("proposal context lacks the query or the domain");
  const bool reject = client_.settings().reject_out_of_range;
  auto a = converse<Assignment>(build_assignment_prompt(ctx, target, templates_), [&](const nlohmann::json& doc) {
    auto parsed = parse_assignment_document(doc, *ctx.query);
    if (contains(target, parsed)) return parsed;
    if (reject) throw ParseError("the values lie outside the subspace " + to_json(target, *ctx.query).dump());
    ++stats_.repaired;
    return clamp_into(target, parsed);
  });
  if (a) return *a;
  ++stats_.fallbacks;
  return fallback_.propose_assignment(ctx, target);
}

std::optional<std::pair<double, double>> LlmStrategy::propose_bounds(const std::string& database,
                                                                     const ParsedQuery& query,
                                                                     const RefinablePredicate& predicate) {
  return converse<std::pair<double, double>>(
      build_probe_prompt(database, query, predicate, templates_), [](const nlohmann::json& doc) {
        const auto lo = doc.find("lo"), hi = doc.find("hi");
        if (lo == doc.end() || hi == doc.end() || !lo->is_number() || !hi->is_number()) {
          throw ParseError("expected {\"lo\": number, \"hi\": number}");
        }
        double a = lo->get<double>(), b = hi->get<double>();
        if (!std::isfinite(a) || !std::isfinite(b)) throw ParseError("bounds must be finite");
        if (a > b) std::swap(a, b);
        return std::pair{a, b};
      });
}

ProposalStats LlmStrategy::stats() const {
  ProposalStats s = stats_;
  s.wire_calls = client_.wire_calls();
  s.tokens = client_.usage();
  return s;
}

}  // namespace refinery
