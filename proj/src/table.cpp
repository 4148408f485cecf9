#include "cinest/table.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>

#include "cinest/error.hpp"

namespace cinest {

namespace {

std::optional<std::int64_t> parse_int(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

std::string canonical_integer(std::string_view raw) {
  auto v = parse_int(raw);
  if (!v) throw LoadError("not an integer: '" + std::string(raw) + "'");
  return std::to_string(*v);
}

Column::Column(std::string name, ColumnKind kind, const std::vector<std::optional<std::string>>& cells)
    : name_(std::move(name)), kind_(kind) {
  codes_.resize(cells.size(), kNullCode);
  if (kind_ == ColumnKind::integer) {
    std::vector<std::int64_t> parsed(cells.size());
    for (std::size_t r = 0; r < cells.size(); ++r) {
      if (!cells[r]) continue;
      auto v = parse_int(*cells[r]);
      if (!v) throw LoadError("row " + std::to_string(r + 1) + ": column '" + name_ + "': unparseable integer '" + *cells[r] + "'");
      parsed[r] = *v;
      ints_.push_back(*v);
    }
    std::sort(ints_.begin(), ints_.end());
    ints_.erase(std::unique(ints_.begin(), ints_.end()), ints_.end());
    for (auto v : ints_) values_.push_back(std::to_string(v));
    for (std::size_t r = 0; r < cells.size(); ++r)
      if (cells[r])
        codes_[r] = static_cast<Code>(std::lower_bound(ints_.begin(), ints_.end(), parsed[r]) - ints_.begin()) + 1;
  } else {
    for (const auto& c : cells)
      if (c) values_.push_back(*c);
    std::sort(values_.begin(), values_.end());
    values_.erase(std::unique(values_.begin(), values_.end()), values_.end());
    for (std::size_t r = 0; r < cells.size(); ++r)
      if (cells[r])
        codes_[r] = static_cast<Code>(std::lower_bound(values_.begin(), values_.end(), *cells[r]) - values_.begin()) + 1;
  }
}

int Column::compare_raw(std::size_t index, std::string_view raw) const {
  if (kind_ == ColumnKind::integer) {
    auto v = parse_int(raw);
    if (!v) throw ParseError("column '" + name_ + "': literal '" + std::string(raw) + "' is not an integer");
    return ints_[index] < *v ? -1 : (ints_[index] > *v ? 1 : 0);
  }
  const int c = values_[index].compare(raw);
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

std::optional<Code> Column::encode(std::string_view raw) const {
  std::size_t lo = 0, hi = values_.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    const int c = compare_raw(mid, raw);
    if (c == 0) return static_cast<Code>(mid + 1);
    if (c < 0)
      lo = mid + 1;
    else
      hi = mid;
  }
  return std::nullopt;
}

std::optional<std::string> Column::decode(Code c) const {
  if (c == kNullCode || c > values_.size()) return std::nullopt;
  return values_[c - 1];
}

std::size_t Column::count_less(std::string_view raw) const {
  std::size_t lo = 0, hi = values_.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (compare_raw(mid, raw) < 0)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo;
}

std::size_t Column::count_less_equal(std::string_view raw) const {
  std::size_t lo = 0, hi = values_.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (compare_raw(mid, raw) <= 0)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo;
}

Table::Table(std::string name, std::vector<Column> columns) : name_(std::move(name)), columns_(std::move(columns)) {
  row_count_ = columns_.empty() ? 0 : columns_.front().row_count();
  for (const auto& c : columns_)
    if (c.row_count() != row_count_) throw LoadError("table '" + name_ + "': columns differ in length");
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

Table load_table(const std::filesystem::path& csv_path, const TableDecl& decl) {
  std::ifstream in(csv_path);
  if (!in) throw LoadError("table '" + decl.name + "': cannot open " + csv_path.string());

  std::string line;
  if (!std::getline(in, line)) throw LoadError("table '" + decl.name + "': missing header row in " + csv_path.string());
  const auto header = split_csv_line(line);
  if (header.size() != decl.columns.size())
    throw LoadError("table '" + decl.name + "': header has " + std::to_string(header.size()) + " columns, schema declares " +
                    std::to_string(decl.columns.size()));
  std::vector<std::size_t> decl_of_field(header.size());
  std::vector<bool> seen(decl.columns.size(), false);
  for (std::size_t f = 0; f < header.size(); ++f) {
    auto idx = decl.column_index(header[f]);
    if (!idx) throw LoadError("table '" + decl.name + "': unknown column '" + header[f] + "' in header");
    if (seen[*idx]) throw LoadError("table '" + decl.name + "': duplicate column '" + header[f] + "' in header");
    seen[*idx] = true;
    decl_of_field[f] = *idx;
  }

  std::vector<std::vector<std::optional<std::string>>> cells(decl.columns.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw LoadError("table '" + decl.name + "': row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(header.size()));
    for (std::size_t f = 0; f < fields.size(); ++f) {
      auto& dst = cells[decl_of_field[f]];
      if (fields[f].empty())
        dst.emplace_back(std::nullopt);
      else
        dst.emplace_back(std::move(fields[f]));
    }
  }

  std::vector<Column> columns;
  for (std::size_t c = 0; c < decl.columns.size(); ++c) {
    try {
      columns.emplace_back(decl.columns[c].name, decl.columns[c].kind, cells[c]);
    } catch (const LoadError& e) {
      throw LoadError("table '" + decl.name + "': " + e.what());
    }
  }
  return Table(decl.name, std::move(columns));
}

Database load_database(const SchemaGraph& schema, const std::filesystem::path& data_dir) {
  Database db;
  db.schema = schema;
  for (const auto& decl : schema.tables()) db.tables.push_back(load_table(data_dir / (decl.name + ".csv"), decl));
  return db;
}

}  // namespace cinest
