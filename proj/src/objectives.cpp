#include "refinery/objectives.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "refinery/errors.hpp"

namespace refinery {

namespace {

using Kind = Expr::Kind;

const std::set<std::string>& column_features() {
  static const std::set<std::string> names = {"sum", "avg", "min", "max", "distinct"};
  return names;
}

struct Arity {
  std::size_t min, max;
};

const std::map<std::string, Arity>& functions() {
  static const std::map<std::string, Arity> table = {
      {"shortfall", {2, 2}}, {"excess", {2, 2}},   {"ratio_dev", {4, 4}}, {"abs_dev", {3, 3}},
      {"sum", {1, 1}},       {"avg", {1, 1}},      {"min", {1, 2}},       {"max", {1, 2}},
      {"distinct", {1, 1}},  {"count_where", {3, 3}}, {"cell", {2, 2}},   {"abs", {1, 1}},
      {"clamp01", {1, 1}},   {"div", {3, 3}},
  };
  return table;
}

class ExprParser {
 public:
  explicit ExprParser(std::string_view text) : text_(text) {}

  ExprPtr run() {
    auto e = parse_sum();
    operand(e);
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw SpecError("in expression '" + std::string(text_) + "' at offset " + std::to_string(pos_) + ": " + message);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }

  static ExprPtr make(Kind kind, std::string text = {}, std::vector<ExprPtr> args = {}, double number = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->text = std::move(text);
    e->args = std::move(args);
    e->number = number;
    return e;
  }

  // Columns and strings only appear as feature arguments.
  const ExprPtr& operand(const ExprPtr& e) const {
    if (e->kind == Kind::column) fail("bare column '" + e->text + "' outside a feature");
    if (e->kind == Kind::string) fail("string literal outside count_where");
    return e;
  }

  ExprPtr parse_sum() {
    auto lhs = parse_product();
    while (true) {
      skip_space();
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        char op = text_[pos_++];
        lhs = make(Kind::binary, std::string(1, op), {operand(lhs), operand(parse_product())});
      } else {
        return lhs;
      }
    }
  }

  ExprPtr parse_product() {
    auto lhs = parse_factor();
    while (true) {
      skip_space();
      if (pos_ < text_.size() && (text_[pos_] == '*' || text_[pos_] == '/')) {
        char op = text_[pos_++];
        lhs = make(Kind::binary, std::string(1, op), {operand(lhs), operand(parse_factor())});
      } else {
        return lhs;
      }
    }
  }

  std::string quoted(char close) {
    std::string out;
    ++pos_;
    while (true) {
      if (pos_ >= text_.size()) fail("unterminated quote");
      char c = text_[pos_++];
      if (c == close) {
        if (pos_ < text_.size() && text_[pos_] == close) {
          out += close;
          ++pos_;
          continue;
        }
        return out;
      }
      out += c;
    }
  }

  ExprPtr parse_factor() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    char c = text_[pos_];
    if (c == '-') {
      ++pos_;
      return make(Kind::negate, "-", {operand(parse_factor())});
    }
    if (c == '(') {
      ++pos_;
      auto e = parse_sum();
      expect(')');
      return e;
    }
    if (c == '\'') return make(Kind::string, quoted('\''));
    if (c == '"') return make(Kind::column, quoted('"'));
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0;
      auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
      if (res.ec != std::errc()) fail("malformed number");
      pos_ = static_cast<std::size_t>(res.ptr - text_.data());
      return make(Kind::number, {}, {}, v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      std::string name(text_.substr(start, pos_ - start));
      if (!eat('(')) {
        if (name == "row_count") return make(Kind::row_count, name);
        return make(Kind::column, name);
      }
      auto fn = functions().find(name);
      if (fn == functions().end()) fail("unknown function '" + name + "'");
      std::vector<ExprPtr> args;
      if (!eat(')')) {
        do {
          args.push_back(parse_argument());
        } while (eat(','));
        expect(')');
      }
      if (args.size() < fn->second.min || args.size() > fn->second.max) {
        fail(name + " takes " + std::to_string(fn->second.min) + " argument(s), got " + std::to_string(args.size()));
      }
      validate_call(name, args);
      return make(Kind::call, name, std::move(args));
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  // count_where accepts a bare comparison operator as its second argument.
  ExprPtr parse_argument() {
    skip_space();
    static const char* ops[] = {"<=", ">=", "!=", "<>", "==", "<", ">", "="};
    for (const char* op : ops) {
      std::string_view o(op);
      if (text_.substr(pos_).starts_with(o)) {
        pos_ += o.size();
        return make(Kind::string, std::string(o));
      }
    }
    return parse_sum();
  }

  void validate_call(const std::string& name, const std::vector<ExprPtr>& args) const {
    bool feature = (column_features().count(name) && args.size() == 1) || name == "count_where";
    if (feature && args[0]->kind != Kind::column) fail(name + " expects a column name as its first argument");
    if (name == "cell" && args[1]->kind != Kind::column) fail("cell expects a column name as its second argument");
    if (name == "count_where") {
      if (args[1]->kind != Kind::string) fail("count_where expects a comparison operator");
      static const std::set<std::string> ok = {"<", "<=", "=", "==", ">=", ">", "!=", "<>"};
      if (!ok.count(args[1]->text)) fail("unknown comparison '" + args[1]->text + "'");
    }
    for (std::size_t i = 0; i < args.size(); ++i) {
      bool column_slot = (feature && i == 0) || (name == "cell" && i == 1);
      bool string_slot = name == "count_where" && (i == 1 || i == 2);
      if (args[i]->kind == Kind::column && !column_slot) fail("bare column '" + args[i]->text + "' outside a feature");
      if (args[i]->kind == Kind::string && !string_slot) fail("string literal outside count_where");
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

double clamp01(double v) {
  if (std::isnan(v)) return 1.0;
  return std::clamp(v, 0.0, 1.0);
}

std::vector<const Scalar*> column_cells(const ResultSet& rs, const std::string& column) {
  std::size_t idx = rs.column_index(column);
  std::vector<const Scalar*> out;
  out.reserve(rs.rows.size());
  for (const auto& row : rs.rows) {
    if (!std::holds_alternative<std::monostate>(row[idx])) out.push_back(&row[idx]);
  }
  return out;
}

std::vector<double> numeric_column(const ResultSet& rs, const std::string& column) {
  std::vector<double> out;
  for (const Scalar* s : column_cells(rs, column)) {
    auto v = as_number(*s);
    if (!v) throw EvalError("column '" + column + "' holds non-numeric value " + format_scalar(*s));
    out.push_back(*v);
  }
  return out;
}

bool compare(const Scalar& cell, const std::string& op, const Expr& rhs, const ResultSet& rs) {
  int cmp = 0;
  if (rhs.kind == Kind::string) {
    std::string lhs = std::holds_alternative<std::string>(cell) ? std::get<std::string>(cell) : format_scalar(cell);
    cmp = lhs.compare(rhs.text);
    cmp = cmp < 0 ? -1 : cmp > 0 ? 1 : 0;
  } else {
    auto v = as_number(cell);
    if (!v) return false;
    double r = evaluate(rhs, rs);
    cmp = *v < r ? -1 : *v > r ? 1 : 0;
  }
  if (op == "<") return cmp < 0;
  if (op == "<=") return cmp <= 0;
  if (op == "=" || op == "==") return cmp == 0;
  if (op == ">=") return cmp >= 0;
  if (op == ">") return cmp > 0;
  return cmp != 0;
}

double eval_call(const Expr& e, const ResultSet& rs) {
  const std::string& f = e.text;
  auto arg = [&](std::size_t i) { return evaluate(*e.args[i], rs); };

  if (f == "count_where") {
    double n = 0;
    for (const Scalar* s : column_cells(rs, e.args[0]->text)) n += compare(*s, e.args[1]->text, *e.args[2], rs);
    return n;
  }
  if (f == "cell") {
    double r = arg(0);
    std::size_t col = rs.column_index(e.args[1]->text);
    if (r < 0 || r != std::floor(r) || r >= static_cast<double>(rs.rows.size())) {
      throw EvalError("cell row " + format_number(r) + " out of range for a result with " +
                      std::to_string(rs.rows.size()) + " rows");
    }
    auto v = as_number(rs.rows[static_cast<std::size_t>(r)][col]);
    return v ? *v : std::nan("");
  }
  if (column_features().count(f) && e.args.size() == 1) {
    const std::string& c = e.args[0]->text;
    if (f == "distinct") {
      std::set<std::string> seen;
      for (const Scalar* s : column_cells(rs, c)) seen.insert(format_scalar(*s));
      return static_cast<double>(seen.size());
    }
    auto values = numeric_column(rs, c);
    if (f == "sum") {
      double total = 0;
      for (double v : values) total += v;
      return total;
    }
    if (values.empty()) return std::nan("");
    if (f == "avg") {
      double total = 0;
      for (double v : values) total += v;
      return total / static_cast<double>(values.size());
    }
    return f == "min" ? *std::min_element(values.begin(), values.end())
                      : *std::max_element(values.begin(), values.end());
  }
  if (f == "min") return std::fmin(arg(0), arg(1));
  if (f == "max") return std::fmax(arg(0), arg(1));
  if (f == "abs") return std::abs(arg(0));
  if (f == "clamp01") return clamp01(arg(0));
  if (f == "div") {
    double d = arg(1);
    return d == 0 ? arg(2) : arg(0) / d;
  }
  if (f == "shortfall") {
    double x = arg(0), t = arg(1);
    return clamp01(std::max(0.0, (t - x) / std::max(std::abs(t), kDistanceZeroGuard)));
  }
  if (f == "excess") {
    double x = arg(0), cap = arg(1);
    return clamp01(std::max(0.0, (x - cap) / std::max(std::abs(cap), kDistanceZeroGuard)));
  }
  if (f == "ratio_dev") {
    double x = arg(0), y = arg(1), target = arg(2), scale = arg(3);
    if (y == 0) return 1.0;
    return clamp01(scale * std::abs(x / y - target));
  }
  if (f == "abs_dev") return clamp01(arg(2) * std::abs(arg(0) - arg(1)));
  throw EvalError("unknown function '" + f + "'");
}

void collect_columns(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == Kind::column && std::find(out.begin(), out.end(), e.text) == out.end()) out.push_back(e.text);
  for (const auto& a : e.args) collect_columns(*a, out);
}

bool plain_identifier(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }) &&
         s != "row_count" && !functions().count(s);
}

std::string quote(const std::string& s, char q) {
  std::string out(1, q);
  for (char c : s) {
    if (c == q) out += q;
    out += c;
  }
  return out + q;
}

int precedence(const Expr& e) {
  if (e.kind != Kind::binary) return 3;
  return (e.text == "+" || e.text == "-") ? 1 : 2;
}

// Code-like rendering for prompts.
std::string render(const Expr& e) {
  auto col = [](const std::string& c) { return "result[" + quote(c, '"') + "]"; };
  switch (e.kind) {
    case Kind::number: return format_number(e.number);
    case Kind::row_count: return "len(result)";
    case Kind::string: return quote(e.text, '\'');
    case Kind::column: return col(e.text);
    case Kind::negate: return "-" + (precedence(*e.args[0]) < 3 ? "(" + render(*e.args[0]) + ")" : render(*e.args[0]));
    case Kind::binary: {
      int p = precedence(e);
      std::string l = render(*e.args[0]), r = render(*e.args[1]);
      if (precedence(*e.args[0]) < p) l = "(" + l + ")";
      if (precedence(*e.args[1]) <= p && precedence(*e.args[1]) < 3) r = "(" + r + ")";
      return l + " " + e.text + " " + r;
    }
    case Kind::call: {
      const std::string& f = e.text;
      if (f == "avg" && e.args.size() == 1) return "mean(" + col(e.args[0]->text) + ")";
      if (f == "distinct") return "len(set(" + col(e.args[0]->text) + "))";
      if (f == "cell") return col(e.args[1]->text) + "[" + render(*e.args[0]) + "]";
      if (f == "count_where") {
        std::string op = e.args[1]->text == "=" ? "==" : e.args[1]->text == "<>" ? "!=" : e.args[1]->text;
        return "count(v for v in " + col(e.args[0]->text) + " if v " + op + " " + render(*e.args[2]) + ")";
      }
      std::string out = f + "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        out += render(*e.args[i]);
      }
      return out + ")";
    }
  }
  return {};
}

void collect_calls(const Expr& e, std::set<std::string>& out) {
  if (e.kind == Kind::call) out.insert(e.text);
  for (const auto& a : e.args) collect_calls(*a, out);
}

const std::map<std::string, std::string>& primitive_code() {
  static const std::map<std::string, std::string> code = {
      {"shortfall", "def shortfall(x, target):\n    return clip01(max(0, (target - x) / abs(target)))\n"},
      {"excess", "def excess(x, cap):\n    return clip01(max(0, (x - cap) / abs(cap)))\n"},
      {"ratio_dev",
       "def ratio_dev(x, y, target, scale):\n    if y == 0:\n        return 1\n"
       "    return clip01(scale * abs(x / y - target))\n"},
      {"abs_dev", "def abs_dev(x, target, scale):\n    return clip01(scale * abs(x - target))\n"},
      {"div", "def div(x, y, fallback):\n    return fallback if y == 0 else x / y\n"},
  };
  return code;
}

}  // namespace

ExprPtr parse_expression(std::string_view text) { return ExprParser(text).run(); }

std::string format_expression(const Expr& e) {
  switch (e.kind) {
    case Kind::number: return format_number(e.number);
    case Kind::row_count: return "row_count";
    case Kind::string: return quote(e.text, '\'');
    case Kind::column: return plain_identifier(e.text) ? e.text : quote(e.text, '"');
    case Kind::negate: return "-(" + format_expression(*e.args[0]) + ")";
    case Kind::binary: return "(" + format_expression(*e.args[0]) + " " + e.text + " " + format_expression(*e.args[1]) + ")";
    case Kind::call: {
      std::string out = e.text + "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        out += format_expression(*e.args[i]);
      }
      return out + ")";
    }
  }
  return {};
}

double evaluate(const Expr& e, const ResultSet& rs) {
  switch (e.kind) {
    case Kind::number: return e.number;
    case Kind::row_count: return static_cast<double>(rs.rows.size());
    case Kind::negate: return -evaluate(*e.args[0], rs);
    case Kind::binary: {
      double l = evaluate(*e.args[0], rs), r = evaluate(*e.args[1], rs);
      switch (e.text[0]) {
        case '+': return l + r;
        case '-': return l - r;
        case '*': return l * r;
        default:
          if (r == 0) throw EvalError("division by zero in " + format_expression(e) + "; use div(x, y, fallback)");
          return l / r;
      }
    }
    case Kind::call: return eval_call(e, rs);
    case Kind::column: throw EvalError("column '" + e.text + "' used outside a feature");
    case Kind::string: throw EvalError("string literal used as a number");
  }
  return 0;
}

std::vector<std::string> referenced_columns(const Expr& expr) {
  std::vector<std::string> out;
  collect_columns(expr, out);
  return out;
}

ConstraintSpec ConstraintSpec::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("terms") || !doc["terms"].is_array() || doc["terms"].empty()) {
    throw SpecError("constraint spec needs a non-empty 'terms' array");
  }
  ConstraintSpec spec;
  std::size_t weighted = 0;
  for (const auto& t : doc["terms"]) {
    DeviationTerm term;
    if (!t.is_object() || !t.contains("expr") || !t["expr"].is_string()) {
      throw SpecError("every constraint term needs an 'expr' string");
    }
    term.source = t["expr"].get<std::string>();
    term.expr = parse_expression(term.source);
    term.name = t.contains("name") ? t["name"].get<std::string>() : "f" + std::to_string(spec.terms.size() + 1);
    if (t.contains("weight")) {
      if (!t["weight"].is_number()) throw SpecError("weight of '" + term.name + "' is not a number");
      term.weight = t["weight"].get<double>();
      if (!(term.weight >= 0) || !std::isfinite(term.weight)) throw SpecError("weight of '" + term.name + "' is negative");
      ++weighted;
    }
    for (const auto& other : spec.terms) {
      if (other.name == term.name) throw SpecError("duplicate constraint term '" + term.name + "'");
    }
    spec.terms.push_back(std::move(term));
  }
  if (weighted == 0) {
    for (auto& t : spec.terms) t.weight = 1.0 / static_cast<double>(spec.terms.size());
  } else if (weighted != spec.terms.size()) {
    throw SpecError("either every constraint term has a weight or none does");
  }
  double total = 0;
  for (const auto& t : spec.terms) total += t.weight;
  if (std::abs(total - 1.0) > 1e-9) throw SpecError("constraint weights sum to " + format_number(total) + ", not 1");
  return spec;
}

nlohmann::ordered_json ConstraintSpec::to_json() const {
  nlohmann::ordered_json terms_doc = nlohmann::ordered_json::array();
  for (const auto& t : terms) terms_doc.push_back({{"name", t.name}, {"expr", t.source}, {"weight", t.weight}});
  return {{"terms", terms_doc}};
}

std::string ConstraintSpec::render_code() const {
  std::ostringstream out;
  out << "# result: rows of the refined query, result[\"col\"] is one column\n";
  out << "def deviation(result):\n";
  std::set<std::string> used;
  for (const auto& t : terms) {
    out << "    " << t.name << " = " << render(*t.expr) << "\n";
    collect_calls(*t.expr, used);
  }
  out << "    return clip01(";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out << " + ";
    out << format_number(terms[i].weight) << " * clip01(" << terms[i].name << ")";
  }
  out << ")\n\n";
  out << "def clip01(x):\n    return min(1, max(0, x))\n";
  for (const auto& [name, code] : primitive_code()) {
    if (used.count(name)) out << "\n" << code;
  }
  return out.str();
}

std::vector<double> eval_terms(const ConstraintSpec& spec, const ResultSet& result) {
  std::vector<double> out;
  out.reserve(spec.terms.size());
  for (const auto& t : spec.terms) out.push_back(clamp01(evaluate(*t.expr, result)));
  return out;
}

double eval_deviation(const ConstraintSpec& spec, const ResultSet& result) {
  auto values = eval_terms(spec, result);
  double total = 0;
  for (std::size_t i = 0; i < values.size(); ++i) total += spec.terms[i].weight * values[i];
  return clamp01(total);
}

DistanceSpec DistanceSpec::from_json(const nlohmann::json& doc) {
  DistanceSpec spec;
  std::string kind = doc.is_string() ? doc.get<std::string>()
                     : doc.is_object() && doc.contains("kind") && doc["kind"].is_string()
                         ? doc["kind"].get<std::string>()
                         : "";
  if (kind == "predicate_based") {
    spec.kind = DistanceKind::predicate_based;
  } else if (kind == "outcome_jaccard") {
    spec.kind = DistanceKind::outcome_jaccard;
  } else {
    throw SpecError("distance kind must be 'predicate_based' or 'outcome_jaccard'");
  }
  return spec;
}

nlohmann::ordered_json DistanceSpec::to_json() const {
  return {{"kind", kind == DistanceKind::predicate_based ? "predicate_based" : "outcome_jaccard"}};
}

std::string DistanceSpec::render_code() const {
  if (kind == DistanceKind::outcome_jaccard) {
    return "# result, result0: multisets of output rows of the refined and the original query\n"
           "def distance(result, result0):\n"
           "    if not result and not result0:\n"
           "        return 0\n"
           "    return 1 - len(result & result0) / len(result | result0)\n";
  }
  return "# theta: refined literals, theta0: original literals, one per refinable predicate\n"
         "def distance(theta, theta0):\n"
         "    total = 0\n"
         "    for p in predicates:\n"
         "        if p.is_numeric:\n"
         "            total += abs(theta[p] - theta0[p]) / max(abs(theta0[p]), 1e-9)\n"
         "        else:\n"
         "            a, b = set(theta[p]), set(theta0[p])\n"
         "            total += 0 if not (a | b) else 1 - len(a & b) / len(a | b)\n"
         "    return total\n";
}

double DistanceSpec::max_distance(const ParsedQuery& query) const {
  return kind == DistanceKind::predicate_based ? static_cast<double>(query.predicates.size()) : 1.0;
}

double jaccard_distance(const CategoricalSet& a, const CategoricalSet& b) {
  std::size_t common = 0;
  for (const auto& v : a) common += b.count(v);
  std::size_t uni = a.size() + b.size() - common;
  return uni == 0 ? 0.0 : 1.0 - static_cast<double>(common) / static_cast<double>(uni);
}

double outcome_jaccard(const ResultSet& a, const ResultSet& b) {
  auto tally = [](const ResultSet& rs) {
    std::map<std::string, std::size_t> counts;
    for (const auto& row : rs.rows) {
      std::string key;
      for (const auto& cell : row) {
        key += format_scalar(cell);
        key += '\x1f';
      }
      ++counts[key];
    }
    return counts;
  };
  auto ca = tally(a), cb = tally(b);
  std::size_t inter = 0, uni = 0;
  for (const auto& [k, n] : ca) {
    auto it = cb.find(k);
    std::size_t m = it == cb.end() ? 0 : it->second;
    inter += std::min(n, m);
    uni += std::max(n, m);
  }
  for (const auto& [k, m] : cb) {
    if (!ca.count(k)) uni += m;
  }
  return uni == 0 ? 0.0 : 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

double distance_impl(const DistanceSpec& spec, const ParsedQuery& query, const Assignment& assignment,
                     const ResultSet* baseline, const ResultSet* refined, bool bounded) {
  if (spec.kind == DistanceKind::outcome_jaccard) {
    if (!baseline || !refined) throw MissingResults("outcome distance needs the baseline and refined results");
    return outcome_jaccard(*refined, *baseline);
  }
  check_assignment(query, assignment);
  double total = 0;
  for (std::size_t i = 0; i < query.predicates.size(); ++i) {
    const Literal& original = query.predicates[i].literal;
    double term = 0;
    if (const auto* c = std::get_if<double>(&original)) {
      double v = std::get<double>(assignment.values[i]);
      term = std::abs(*c - v) / std::max(std::abs(*c), kDistanceZeroGuard);
    } else {
      term = jaccard_distance(std::get<CategoricalSet>(original), std::get<CategoricalSet>(assignment.values[i]));
    }
    total += bounded ? std::min(term, 1.0) : term;
  }
  return total;
}

}  // namespace

double eval_distance(const DistanceSpec& spec, const ParsedQuery& query, const Assignment& assignment,
                     const ResultSet* baseline_result, const ResultSet* refined_result) {
  return distance_impl(spec, query, assignment, baseline_result, refined_result, false);
}

double bounded_distance(const DistanceSpec& spec, const ParsedQuery& query, const Assignment& assignment,
                        const ResultSet* baseline_result, const ResultSet* refined_result) {
  return distance_impl(spec, query, assignment, baseline_result, refined_result, true);
}

double optimality(double distance, double optimum, double max_distance) {
  if (max_distance == optimum) throw DegenerateDenominator("maximal and optimal distance coincide");
  return (max_distance - std::min(distance, max_distance)) / (max_distance - optimum);
}

}  // namespace refinery
