#include "refinery/catalog.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "csv.hpp"
#include "refinery/errors.hpp"
#include "refinery/stats.hpp"
#include "sql_lexer.hpp"

namespace refinery {

namespace fs = std::filesystem;

namespace {

bool ieq(std::string_view a, std::string_view b) {
  return detail::upper(a) == detail::upper(b);
}

std::string quote_ident(std::string_view name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_real(std::string_view s) {
  if (s.starts_with('+')) s.remove_prefix(1);
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

ColumnType parse_column_type(const std::string& s) {
  if (s == "integer") return ColumnType::integer;
  if (s == "real" || s == "float") return ColumnType::real;
  if (s == "text" || s == "category") return ColumnType::text;
  throw SchemaError("unknown column type '" + s + "'");
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

// COUNT_IF(cond): number of rows where cond is non-NULL and non-zero.
void count_if_step(sqlite3_context* ctx, int, sqlite3_value** argv) {
  auto* count = static_cast<std::int64_t*>(sqlite3_aggregate_context(ctx, sizeof(std::int64_t)));
  if (count && sqlite3_value_type(argv[0]) != SQLITE_NULL && sqlite3_value_double(argv[0]) != 0.0) {
    ++*count;
  }
}

void count_if_final(sqlite3_context* ctx) {
  auto* count = static_cast<std::int64_t*>(sqlite3_aggregate_context(ctx, 0));
  sqlite3_result_int64(ctx, count ? *count : 0);
}

struct StatementCloser {
  void operator()(sqlite3_stmt* s) const noexcept { sqlite3_finalize(s); }
};
using Statement = std::unique_ptr<sqlite3_stmt, StatementCloser>;

void exec_or_throw(sqlite3* db, const std::string& sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw ExecError(msg, sql);
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::optional<double> as_number(const Scalar& value) {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&value)) return *d;
  if (const auto* s = std::get_if<std::string>(&value)) return parse_real(*s);
  return std::nullopt;
}

std::string format_scalar(const Scalar& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "NULL";
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_number(v);
        } else {
          return quote_string(v);
        }
      },
      value);
}

std::optional<std::size_t> ResultSet::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (ieq(columns[i], name)) return i;
  }
  return std::nullopt;
}

std::size_t ResultSet::column_index(std::string_view name) const {
  if (auto i = find_column(name)) return *i;
  throw UnknownColumn("result has no column '" + std::string(name) + "'");
}

std::string to_string(ColumnType type) {
  switch (type) {
    case ColumnType::integer: return "integer";
    case ColumnType::real: return "float";
    case ColumnType::text: return "category";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest DatasetManifest::from_json(const nlohmann::json& doc, const fs::path& base_dir) {
  DatasetManifest m;
  if (!doc.is_object() || !doc.contains("tables") || !doc["tables"].is_array()) {
    throw SchemaError("dataset manifest needs a 'tables' array");
  }
  for (const auto& t : doc["tables"]) {
    TableManifest tm;
    try {
      tm.name = t.at("name").get<std::string>();
      fs::path csv = t.at("csv").get<std::string>();
      tm.csv_path = csv.is_absolute() ? csv : base_dir / csv;
      if (t.contains("primary_key") && !t["primary_key"].is_null()) {
        tm.primary_key = t["primary_key"].get<std::string>();
      }
      const auto fks = t.value("foreign_keys", nlohmann::json::array());
      for (const auto& fk : fks) {
        ForeignKey k;
        k.column = fk.at("column").get<std::string>();
        std::string ref = fk.at("references").get<std::string>();
        auto open = ref.find('(');
        if (open == std::string::npos || ref.back() != ')') {
          throw SchemaError("foreign key reference must look like table(column): " + ref);
        }
        k.references_table = ref.substr(0, open);
        k.references_column = ref.substr(open + 1, ref.size() - open - 2);
        tm.foreign_keys.push_back(std::move(k));
      }
      const auto types = t.value("types", nlohmann::json::object());
      for (const auto& [col, type] : types.items()) {
        tm.column_types[col] = parse_column_type(type.get<std::string>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("malformed table entry in dataset manifest: ") + e.what());
    }
    m.tables.push_back(std::move(tm));
  }
  return m;
}

DatasetManifest DatasetManifest::from_file(const fs::path& path) {
  auto text = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("dataset manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(doc, path.parent_path());
}

nlohmann::ordered_json DatasetManifest::to_json(const fs::path& base_dir) const {
  nlohmann::ordered_json tables_doc = nlohmann::ordered_json::array();
  for (const auto& t : tables) {
    nlohmann::ordered_json e;
    e["name"] = t.name;
    fs::path csv = t.csv_path;
    if (!base_dir.empty()) csv = fs::proximate(csv, base_dir);
    e["csv"] = csv.generic_string();
    if (t.primary_key) e["primary_key"] = *t.primary_key;
    if (!t.foreign_keys.empty()) {
      auto& fks = e["foreign_keys"] = nlohmann::ordered_json::array();
      for (const auto& fk : t.foreign_keys) {
        fks.push_back({{"column", fk.column},
                       {"references", fk.references_table + "(" + fk.references_column + ")"}});
      }
    }
    if (!t.column_types.empty()) {
      auto& types = e["types"] = nlohmann::ordered_json::object();
      for (const auto& [col, type] : t.column_types) {
        types[col] = type == ColumnType::integer ? "integer" : type == ColumnType::real ? "real" : "text";
      }
    }
    tables_doc.push_back(std::move(e));
  }
  return {{"tables", tables_doc}};
}

const ColumnSchema* TableSchema::find_column(std::string_view column) const {
  for (const auto& c : columns) {
    if (ieq(c.name, column)) return &c;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Catalog

void Catalog::Closer::operator()(sqlite3* db) const noexcept { sqlite3_close_v2(db); }

Catalog::Catalog() : executions_(std::make_unique<std::atomic<std::uint64_t>>(0)) {}
Catalog::Catalog(Catalog&&) noexcept = default;
Catalog& Catalog::operator=(Catalog&&) noexcept = default;
Catalog::~Catalog() = default;

Catalog Catalog::load(const DatasetManifest& manifest) {
  Catalog cat;
  sqlite3* raw = nullptr;
  int rc = sqlite3_open_v2(":memory:", &raw,
                           SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX, nullptr);
  cat.db_.reset(raw);
  if (rc != SQLITE_OK) throw Error("cannot open in-memory database");
  sqlite3_create_function(raw, "COUNT_IF", 1, SQLITE_UTF8 | SQLITE_DETERMINISTIC, nullptr, nullptr,
                          count_if_step, count_if_final);

  for (const auto& tm : manifest.tables) {
    for (const auto& existing : cat.tables_) {
      if (ieq(existing.name, tm.name)) throw SchemaError("duplicate table '" + tm.name + "'");
    }
    auto records = detail::parse_csv(read_file(tm.csv_path));
    if (records.empty()) throw SchemaError("'" + tm.csv_path.string() + "' has no header row");

    TableSchema schema;
    schema.name = tm.name;
    const auto& header = records.front().fields;
    for (const auto& h : header) {
      if (h.empty()) throw SchemaError("empty column name in '" + tm.csv_path.string() + "'");
      for (const auto& c : schema.columns) {
        if (ieq(c.name, h)) throw SchemaError("duplicate column '" + h + "' in table " + tm.name);
      }
      schema.columns.push_back({h, ColumnType::integer});
    }
    const std::size_t width = header.size();
    for (std::size_t r = 1; r < records.size(); ++r) {
      if (records[r].fields.size() != width) {
        throw SchemaError(tm.csv_path.string() + ":" + std::to_string(records[r].line) + ": expected " +
                          std::to_string(width) + " fields, found " +
                          std::to_string(records[r].fields.size()));
      }
    }

    auto is_null = [&](std::size_t r, std::size_t c) {
      return records[r].fields[c].empty() && !records[r].quoted[c];
    };
    for (std::size_t c = 0; c < width; ++c) {
      auto declared = tm.column_types.find(schema.columns[c].name);
      bool all_int = true, all_real = true;
      for (std::size_t r = 1; r < records.size(); ++r) {
        if (is_null(r, c)) continue;
        const auto& f = records[r].fields[c];
        if (all_int && !parse_int(f)) all_int = false;
        if (all_real && !parse_real(f)) all_real = false;
      }
      ColumnType inferred = all_int ? ColumnType::integer : all_real ? ColumnType::real : ColumnType::text;
      if (declared != tm.column_types.end()) {
        bool ok = declared->second == ColumnType::text ||
                  (declared->second == ColumnType::real && all_real) ||
                  (declared->second == ColumnType::integer && all_int);
        if (!ok) {
          throw TypeInferenceError("column '" + schema.columns[c].name + "' of table " + tm.name +
                                   " is declared " + to_string(declared->second) +
                                   " but holds non-conforming values");
        }
        inferred = declared->second;
      }
      // a column without any value defaults to text
      bool any_value = false;
      for (std::size_t r = 1; r < records.size() && !any_value; ++r) any_value = !is_null(r, c);
      if (!any_value && declared == tm.column_types.end()) inferred = ColumnType::text;
      schema.columns[c].type = inferred;
    }
    for (const auto& [col, type] : tm.column_types) {
      if (!schema.find_column(col)) throw SchemaError("declared type for unknown column '" + col + "'");
    }

    std::string create = "CREATE TABLE " + quote_ident(tm.name) + " (";
    std::string insert = "INSERT INTO " + quote_ident(tm.name) + " VALUES (";
    for (std::size_t c = 0; c < width; ++c) {
      if (c) {
        create += ", ";
        insert += ", ";
      }
      const char* decl = schema.columns[c].type == ColumnType::integer ? "INTEGER"
                         : schema.columns[c].type == ColumnType::real  ? "REAL"
                                                                       : "TEXT";
      create += quote_ident(schema.columns[c].name) + " " + decl;
      insert += "?";
    }
    exec_or_throw(raw, create + ")");
    exec_or_throw(raw, "BEGIN");
    sqlite3_stmt* stmt_raw = nullptr;
    insert += ")";
    if (sqlite3_prepare_v2(raw, insert.c_str(), -1, &stmt_raw, nullptr) != SQLITE_OK) {
      throw ExecError(sqlite3_errmsg(raw), insert);
    }
    Statement stmt(stmt_raw);
    for (std::size_t r = 1; r < records.size(); ++r) {
      sqlite3_reset(stmt_raw);
      for (std::size_t c = 0; c < width; ++c) {
        int slot = static_cast<int>(c + 1);
        const auto& f = records[r].fields[c];
        if (is_null(r, c)) {
          sqlite3_bind_null(stmt_raw, slot);
        } else if (schema.columns[c].type == ColumnType::integer) {
          sqlite3_bind_int64(stmt_raw, slot, *parse_int(f));
        } else if (schema.columns[c].type == ColumnType::real) {
          sqlite3_bind_double(stmt_raw, slot, *parse_real(f));
        } else {
          sqlite3_bind_text(stmt_raw, slot, f.data(), static_cast<int>(f.size()), SQLITE_TRANSIENT);
        }
      }
      if (sqlite3_step(stmt_raw) != SQLITE_DONE) throw ExecError(sqlite3_errmsg(raw), insert);
    }
    exec_or_throw(raw, "COMMIT");
    schema.row_count = records.size() - 1;
    schema.primary_key = tm.primary_key;
    schema.foreign_keys = tm.foreign_keys;
    if (tm.primary_key && !schema.find_column(*tm.primary_key)) {
      throw SchemaError("primary key '" + *tm.primary_key + "' is not a column of " + tm.name);
    }
    for (const auto& fk : tm.foreign_keys) {
      if (!schema.find_column(fk.column)) {
        throw SchemaError("foreign key column '" + fk.column + "' is not a column of " + tm.name);
      }
    }
    cat.tables_.push_back(std::move(schema));
  }

  for (const auto& t : cat.tables_) {
    for (const auto& fk : t.foreign_keys) {
      auto it = std::find_if(cat.tables_.begin(), cat.tables_.end(),
                             [&](const TableSchema& s) { return ieq(s.name, fk.references_table); });
      if (it == cat.tables_.end() || !it->find_column(fk.references_column)) {
        throw SchemaError("foreign key " + t.name + "." + fk.column + " references unknown " +
                          fk.references_table + "(" + fk.references_column + ")");
      }
    }
  }
  return cat;
}

ResultSet Catalog::execute(std::string_view sql) const {
  sqlite3* db = db_.get();
  sqlite3_mutex* mutex = sqlite3_db_mutex(db);
  sqlite3_mutex_enter(mutex);
  struct Unlock {
    sqlite3_mutex* m;
    ~Unlock() { sqlite3_mutex_leave(m); }
  } unlock{mutex};

  executions_->fetch_add(1);
  sqlite3_stmt* raw = nullptr;
  const char* tail = nullptr;
  if (sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &raw, &tail) != SQLITE_OK) {
    throw ExecError(sqlite3_errmsg(db), std::string(sql));
  }
  Statement stmt(raw);
  if (!raw) throw ExecError("empty statement", std::string(sql));
  for (const char* p = tail; p && p < sql.data() + sql.size(); ++p) {
    if (!std::isspace(static_cast<unsigned char>(*p)) && *p != ';') {
      throw ExecError("only a single statement may be executed", std::string(sql));
    }
  }

  ResultSet rs;
  const int ncol = sqlite3_column_count(raw);
  for (int c = 0; c < ncol; ++c) rs.columns.emplace_back(sqlite3_column_name(raw, c));
  while (true) {
    int rc = sqlite3_step(raw);
    if (rc == SQLITE_DONE) break;
    if (rc != SQLITE_ROW) throw ExecError(sqlite3_errmsg(db), std::string(sql));
    std::vector<Scalar> row;
    row.reserve(static_cast<std::size_t>(ncol));
    for (int c = 0; c < ncol; ++c) {
      switch (sqlite3_column_type(raw, c)) {
        case SQLITE_INTEGER: row.emplace_back(static_cast<std::int64_t>(sqlite3_column_int64(raw, c))); break;
        case SQLITE_FLOAT: row.emplace_back(sqlite3_column_double(raw, c)); break;
        case SQLITE_NULL: row.emplace_back(std::monostate{}); break;
        default: {
          const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(raw, c));
          row.emplace_back(std::string(text, static_cast<std::size_t>(sqlite3_column_bytes(raw, c))));
        }
      }
    }
    rs.rows.push_back(std::move(row));
  }
  return rs;
}

const TableSchema& Catalog::table(std::string_view name) const {
  for (const auto& t : tables_) {
    if (ieq(t.name, name)) return t;
  }
  throw UnknownTable("no table named '" + std::string(name) + "'");
}

ColumnProfile Catalog::profile_column(std::string_view table_name, std::string_view column_name) const {
  const TableSchema& t = table(table_name);
  const ColumnSchema* col = t.find_column(column_name);
  if (!col) throw UnknownColumn("table " + t.name + " has no column '" + std::string(column_name) + "'");

  ColumnProfile p;
  p.name = col->name;
  p.type = col->type;
  const std::string qcol = quote_ident(col->name);
  const std::string qtab = quote_ident(t.name);

  if (p.is_numeric()) {
    auto rs = execute("SELECT " + qcol + " FROM " + qtab + " WHERE " + qcol + " IS NOT NULL ORDER BY " + qcol);
    std::vector<double> values;
    values.reserve(rs.rows.size());
    for (const auto& row : rs.rows) values.push_back(*as_number(row[0]));
    p.non_null = values.size();
    if (!values.empty()) {
      NumericStats s;
      s.mean = stats::mean(values);
      s.stddev = stats::population_stddev(values);
      s.q1 = stats::quantile_sorted(values, 0.25);
      s.median = stats::quantile_sorted(values, 0.5);
      s.q3 = stats::quantile_sorted(values, 0.75);
      s.min = values.front();
      s.max = values.back();
      p.numeric = s;
    }
    auto distinct = execute("SELECT COUNT(DISTINCT " + qcol + ") FROM " + qtab);
    p.distinct_count = static_cast<std::size_t>(std::get<std::int64_t>(distinct.rows.at(0).at(0)));
    return p;
  }

  auto rs = execute("SELECT " + qcol + ", COUNT(*) AS n FROM " + qtab + " WHERE " + qcol +
                    " IS NOT NULL GROUP BY " + qcol + " ORDER BY n DESC, " + qcol + " ASC");
  std::size_t total = 0;
  for (const auto& row : rs.rows) total += static_cast<std::size_t>(std::get<std::int64_t>(row[1]));
  p.non_null = total;
  p.distinct_count = rs.rows.size();
  double other = 0;
  for (std::size_t i = 0; i < rs.rows.size(); ++i) {
    double share = static_cast<double>(std::get<std::int64_t>(rs.rows[i][1])) / static_cast<double>(total);
    if (i < kCategoryCap) {
      p.categories.push_back({format_scalar(rs.rows[i][0]), share, false});
      if (auto* s = std::get_if<std::string>(&rs.rows[i][0])) p.categories.back().value = *s;
    } else {
      other += share;
    }
  }
  if (rs.rows.size() > kCategoryCap) p.categories.push_back({"other", other, true});
  return p;
}

std::optional<ResolvedColumn> Catalog::resolve(const ParsedQuery& query, const ColumnRef& ref) const {
  auto lookup = [&](std::string_view table_name) -> std::optional<ResolvedColumn> {
    for (const auto& t : tables_) {
      if (!ieq(t.name, table_name)) continue;
      if (const auto* c = t.find_column(ref.column)) return ResolvedColumn{&t, c};
    }
    return std::nullopt;
  };
  if (!ref.table.empty()) {
    return lookup(query.resolve_table(ref.table).value_or(ref.table));
  }
  for (const auto& tr : query.tables) {
    if (auto r = lookup(tr.name)) return r;
  }
  return std::nullopt;
}

DatabaseDescription Catalog::describe_for_query(const ParsedQuery& query) const {
  DatabaseDescription d;
  std::vector<const TableSchema*> schemas;
  for (const auto& tr : query.tables) {
    const TableSchema& t = table(tr.name);
    if (std::find(schemas.begin(), schemas.end(), &t) != schemas.end()) continue;
    schemas.push_back(&t);
    TableDescription td;
    td.table = t.name;
    td.primary_key = t.primary_key;
    td.foreign_keys = t.foreign_keys;
    td.row_count = t.row_count;
    d.tables.push_back(std::move(td));
  }
  for (const auto& p : query.predicates) {
    if (p.column && !resolve(query, *p.column)) {
      throw UnknownColumn("predicate attribute '" + p.attribute + "' is not a column of the queried tables");
    }
  }
  for (const auto& ref : query.columns) {
    auto r = resolve(query, ref);
    if (!r) continue;  // output alias or column of a nested block
    auto pos = std::find(schemas.begin(), schemas.end(), r->table) - schemas.begin();
    auto& td = d.tables[static_cast<std::size_t>(pos)];
    bool present = std::any_of(td.columns.begin(), td.columns.end(),
                               [&](const ColumnProfile& c) { return c.name == r->column->name; });
    if (!present) td.columns.push_back(profile_column(r->table->name, r->column->name));
  }
  return d;
}

nlohmann::ordered_json DatabaseDescription::to_json() const {
  using oj = nlohmann::ordered_json;
  oj out = oj::array();
  for (const auto& t : tables) {
    oj e;
    e["table"] = t.table;
    e["primary_key"] = t.primary_key ? oj(*t.primary_key) : oj(nullptr);
    if (!t.foreign_keys.empty()) {
      oj fks = oj::array();
      for (const auto& fk : t.foreign_keys) {
        fks.push_back({{"column", fk.column},
                       {"references", fk.references_table + "(" + fk.references_column + ")"}});
      }
      e["foreign_keys"] = fks;
    }
    e["row_count"] = t.row_count;
    oj attrs = oj::object();
    for (const auto& c : t.columns) {
      oj a;
      a["type"] = to_string(c.type);
      if (c.is_numeric()) {
        if (c.numeric) {
          const auto& s = *c.numeric;
          a["domain"] = oj::array({round4(s.min), round4(s.max)});
          a["stats"] = {{"mean", round4(s.mean)}, {"std", round4(s.stddev)}, {"q1", round4(s.q1)},
                        {"median", round4(s.median)}, {"q3", round4(s.q3)}};
        } else {
          a["domain"] = oj::array();
        }
      } else {
        oj domain = oj::array();
        oj dist = oj::array();
        for (const auto& cat : c.categories) {
          if (!cat.is_other) domain.push_back(cat.value);
          dist.push_back({{"value", cat.is_other ? "<other>" : cat.value}, {"p", round4(cat.prevalence)}});
        }
        a["domain"] = domain;
        if (c.distinct_count > kCategoryCap) a["distinct_count"] = c.distinct_count;
        a["stats"] = {{"distribution", dist}};
      }
      attrs[c.name] = a;
    }
    e["attributes"] = attrs;
    out.push_back(std::move(e));
  }
  return out;
}

std::string DatabaseDescription::render() const { return to_json().dump(2); }

}  // namespace refinery
