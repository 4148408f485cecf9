#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cinest/schema_graph.hpp"

namespace cinest {

using Code = std::uint32_t;
inline constexpr Code kNullCode = 0;

// Dictionary-encoded column. Code 0 is reserved for NULL; codes 1..n map to
// the sorted distinct raw values (numerically for integers, bytewise for
// categorical values), so range predicates become code intervals.
class Column {
 public:
  Column() = default;
  // Builds the dictionary from raw cells; nullopt cells are NULL.
  // Throws LoadError for unparseable integers (row is 0-based here).
  Column(std::string name, ColumnKind kind, const std::vector<std::optional<std::string>>& cells);

  const std::string& name() const { return name_; }
  ColumnKind kind() const { return kind_; }
  std::size_t row_count() const { return codes_.size(); }

  // |dom(A)|: distinct values plus the NULL code.
  std::size_t domain_size() const { return values_.size() + 1; }
  std::size_t distinct_values() const { return values_.size(); }

  std::span<const Code> codes() const { return codes_; }
  Code code(std::size_t row) const { return codes_[row]; }

  std::optional<Code> encode(std::string_view raw) const;
  std::optional<std::string> decode(Code c) const;
  // Integer value of a non-NULL code (integer columns only).
  std::int64_t integer_value(Code c) const { return ints_.at(c - 1); }
  const std::vector<std::string>& values() const { return values_; }

  // Number of non-NULL values strictly below / at-or-below `raw` in
  // dictionary order. Used to map range endpoints onto code intervals.
  std::size_t count_less(std::string_view raw) const;
  std::size_t count_less_equal(std::string_view raw) const;

 private:
  int compare_raw(std::size_t index, std::string_view raw) const;

  std::string name_;
  ColumnKind kind_ = ColumnKind::integer;
  std::vector<std::string> values_;
  std::vector<std::int64_t> ints_;
  std::vector<Code> codes_;
};

// Canonical text of an integer literal ("007" -> "7"). Throws on garbage.
std::string canonical_integer(std::string_view raw);

class Table {
 public:
  Table() = default;
  Table(std::string name, std::vector<Column> columns);

  const std::string& name() const { return name_; }
  std::size_t row_count() const { return row_count_; }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_.at(i); }

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::size_t row_count_ = 0;
};

// Tables indexed by the schema's TableId.
struct Database {
  SchemaGraph schema;
  std::vector<Table> tables;

  const Table& table(TableId id) const { return tables.at(id); }
  const Column& column(TableId t, std::size_t c) const { return tables.at(t).column(c); }
};

// Loads one CSV (header row + data rows, comma separated, optional double
// quotes). Header must list exactly the declared columns, in any order.
Table load_table(const std::filesystem::path& csv_path, const TableDecl& decl);

// Loads <data_dir>/<table>.csv for every table of the schema.
Database load_database(const SchemaGraph& schema, const std::filesystem::path& data_dir);

// Splits one CSV record. Exposed for tests.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace cinest
