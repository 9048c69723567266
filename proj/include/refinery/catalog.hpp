#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "refinery/query_model.hpp"

struct sqlite3;

namespace refinery {

// A single result cell: NULL, integer, real or text.
using Scalar = std::variant<std::monostate, std::int64_t, double, std::string>;

std::optional<double> as_number(const Scalar& value);
// Canonical text used when comparing rows as tuples.
std::string format_scalar(const Scalar& value);

struct ResultSet {
  std::vector<std::string> columns;
  std::vector<std::vector<Scalar>> rows;

  // Case-insensitive column lookup; throws UnknownColumn.
  std::size_t column_index(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
};

enum class ColumnType { integer, real, text };

struct ForeignKey {
  std::string column;
  std::string references_table;
  std::string references_column;
};

struct TableManifest {
  std::string name;
  std::filesystem::path csv_path;
  std::optional<std::string> primary_key;
  std::vector<ForeignKey> foreign_keys;
  // Optional declared column types; undeclared columns are inferred.
  std::map<std::string, ColumnType> column_types;
};

// Lists the CSV-backed tables of a dataset. JSON shape:
//   {"tables": [{"name": "...", "csv": "relative/or/absolute.csv",
//                "primary_key": "id",
//                "foreign_keys": [{"column": "c", "references": "t(c)"}],
//                "types": {"col": "integer" | "real" | "text"}}]}
// Relative csv paths resolve against `base_dir`.
struct DatasetManifest {
  std::vector<TableManifest> tables;

  static DatasetManifest from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
  static DatasetManifest from_file(const std::filesystem::path& path);
  nlohmann::ordered_json to_json(const std::filesystem::path& base_dir = {}) const;
};

struct ColumnSchema {
  std::string name;
  ColumnType type;
};

struct TableSchema {
  std::string name;
  std::vector<ColumnSchema> columns;
  std::optional<std::string> primary_key;
  std::vector<ForeignKey> foreign_keys;
  std::size_t row_count = 0;

  const ColumnSchema* find_column(std::string_view column) const;
};

struct NumericStats {
  double mean = 0, stddev = 0, q1 = 0, median = 0, q3 = 0, min = 0, max = 0;
};

struct CategoryShare {
  std::string value;
  double prevalence = 0;
  bool is_other = false;  // aggregated mass of the values beyond the cap
};

struct ColumnProfile {
  std::string name;
  ColumnType type = ColumnType::text;
  std::size_t non_null = 0;
  std::optional<NumericStats> numeric;
  std::vector<CategoryShare> categories;  // most frequent first, capped
  std::size_t distinct_count = 0;

  bool is_numeric() const noexcept { return type != ColumnType::text; }
};

struct TableDescription {
  std::string table;
  std::optional<std::string> primary_key;
  std::vector<ForeignKey> foreign_keys;
  std::size_t row_count = 0;
  std::vector<ColumnProfile> columns;
};

struct DatabaseDescription {
  std::vector<TableDescription> tables;

  nlohmann::ordered_json to_json() const;
  std::string render() const;
};

struct ResolvedColumn {
  const TableSchema* table;
  const ColumnSchema* column;
};

inline constexpr std::size_t kCategoryCap = 50;

// In-memory SQLite database holding the loaded tables. Queries may run
// concurrently from several threads; the data is never modified after load.
class Catalog {
 public:
  static Catalog load(const DatasetManifest& manifest);

  Catalog(Catalog&&) noexcept;
  Catalog& operator=(Catalog&&) noexcept;
  ~Catalog();

  ResultSet execute(std::string_view sql) const;

  const std::vector<TableSchema>& tables() const noexcept { return tables_; }
  const TableSchema& table(std::string_view name) const;  // UnknownTable

  ColumnProfile profile_column(std::string_view table, std::string_view column) const;

  // Resolves a column reference against the tables of `query`. Unqualified
  // names bind to the first referenced table that has the column.
  std::optional<ResolvedColumn> resolve(const ParsedQuery& query, const ColumnRef& ref) const;

  DatabaseDescription describe_for_query(const ParsedQuery& query) const;

  std::uint64_t executions() const noexcept { return executions_->load(); }

 private:
  Catalog();

  struct Closer {
    void operator()(sqlite3* db) const noexcept;
  };
  std::unique_ptr<sqlite3, Closer> db_;
  std::vector<TableSchema> tables_;
  std::unique_ptr<std::atomic<std::uint64_t>> executions_;
};

std::string to_string(ColumnType type);

}  // namespace refinery
