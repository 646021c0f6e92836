#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "whatif/error.hpp"

namespace whatif {

/// Column layout of a dataset. Attribute order everywhere downstream is
/// `treatments` followed by `outcome`.
struct Schema {
  std::string id_column;
  std::optional<std::string> name_column;
  std::string outcome;
  std::vector<std::string> treatments;

  /// Largest attribute count (treatments + outcome) the engine is tuned for.
  static constexpr std::size_t kSupportedAttributes = 15;

  std::size_t attribute_count() const { return treatments.size() + 1; }
  std::size_t outcome_index() const { return treatments.size(); }

  std::vector<std::string> attributes() const {
    std::vector<std::string> out = treatments;
    out.push_back(outcome);
    return out;
  }

  std::optional<std::size_t> attribute_index(std::string_view name) const {
    for (std::size_t i = 0; i < treatments.size(); ++i) {
      if (treatments[i] == name) return i;
    }
    if (outcome == name) return outcome_index();
    return std::nullopt;
  }

  bool is_treatment(std::string_view name) const {
    return std::find(treatments.begin(), treatments.end(), name) != treatments.end();
  }

  /// Checks the structural invariants and returns non-fatal warnings.
  std::vector<std::string> validate() const {
    if (id_column.empty()) throw Error(errc::kInvalidSchema, "schema: id_column is empty");
    if (outcome.empty()) throw Error(errc::kInvalidSchema, "schema: outcome is empty");
    if (treatments.empty()) throw Error(errc::kInvalidSchema, "schema: treatments is empty");
    std::unordered_set<std::string> seen{id_column};
    if (name_column) {
      if (!seen.insert(*name_column).second) {
        throw Error(errc::kInvalidSchema, "schema: duplicate column name '" + *name_column + "'");
      }
    }
    for (const auto& name : attributes()) {
      if (name.empty()) throw Error(errc::kInvalidSchema, "schema: empty attribute name");
      if (!seen.insert(name).second) {
        throw Error(errc::kInvalidSchema, "schema: duplicate column name '" + name + "'");
      }
    }
    std::vector<std::string> warnings;
    if (attribute_count() > kSupportedAttributes) {
      warnings.push_back("schema has " + std::to_string(attribute_count()) +
                         " attributes; more than " + std::to_string(kSupportedAttributes) +
                         " is outside the supported envelope");
    }
    return warnings;
  }
};

inline nlohmann::json schema_to_json(const Schema& s) {
  nlohmann::json j;
  j["id_column"] = s.id_column;
  j["name_column"] = s.name_column ? nlohmann::json(*s.name_column) : nlohmann::json(nullptr);
  j["outcome"] = s.outcome;
  j["treatments"] = s.treatments;
  return j;
}

inline Schema schema_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(errc::kInvalidSchema, "schema: expected a JSON object");
  Schema s;
  try {
    s.id_column = j.at("id_column").get<std::string>();
    if (j.contains("name_column") && !j["name_column"].is_null()) {
      s.name_column = j["name_column"].get<std::string>();
    }
    s.outcome = j.at("outcome").get<std::string>();
    s.treatments = j.at("treatments").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(errc::kInvalidSchema, std::string("schema: ") + e.what());
  }
  s.validate();
  return s;
}

inline Schema parse_schema(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(errc::kInvalidSchema, std::string("schema: ") + e.what());
  }
  return schema_from_json(j);
}

struct Unit {
  std::string id;
  std::string name;
  std::vector<double> values;  // treatments then outcome
};

struct AttributeStats {
  std::vector<double> mean;
  std::vector<double> sd;  // population standard deviation
};

inline AttributeStats compute_stats(std::span<const Unit> units, std::size_t width) {
  AttributeStats st{std::vector<double>(width, 0.0), std::vector<double>(width, 0.0)};
  if (units.empty()) return st;
  const double n = static_cast<double>(units.size());
  for (const auto& u : units) {
    for (std::size_t j = 0; j < width; ++j) st.mean[j] += u.values[j];
  }
  for (auto& m : st.mean) m /= n;
  for (const auto& u : units) {
    for (std::size_t j = 0; j < width; ++j) {
      const double d = u.values[j] - st.mean[j];
      st.sd[j] += d * d;
    }
  }
  for (auto& s : st.sd) s = std::sqrt(s / n);
  return st;
}

/// Immutable table of geographic units.
class Dataset {
 public:
  Dataset(Schema schema, std::vector<Unit> units) : schema_(std::move(schema)), units_(std::move(units)) {
    warnings_ = schema_.validate();
    if (units_.empty()) throw Error(errc::kEmptyDataset, "dataset has no rows");
    const std::size_t width = schema_.attribute_count();
    for (std::size_t i = 0; i < units_.size(); ++i) {
      const auto& u = units_[i];
      if (u.values.size() != width) {
        throw Error(errc::kShapeMismatch, "unit '" + u.id + "' has " + std::to_string(u.values.size()) +
                                              " values, expected " + std::to_string(width));
      }
      for (double v : u.values) {
        if (!std::isfinite(v)) throw Error(errc::kParseError, "unit '" + u.id + "' has a non-finite value");
      }
      if (!index_.emplace(u.id, i).second) throw Error(errc::kDuplicateId, "duplicate unit id '" + u.id + "'");
    }
    stats_ = compute_stats(units_, width);
  }

  const Schema& schema() const { return schema_; }
  const std::vector<Unit>& units() const { return units_; }
  const AttributeStats& stats() const { return stats_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  std::size_t size() const { return units_.size(); }
  std::size_t treatment_count() const { return schema_.treatments.size(); }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const Unit& unit(std::string_view id) const {
    auto idx = find(id);
    if (!idx) throw Error(errc::kUnknownUnit, "unknown unit '" + std::string(id) + "'");
    return units_[*idx];
  }

 private:
  Schema schema_;
  std::vector<Unit> units_;
  AttributeStats stats_;
  std::vector<std::string> warnings_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// RFC 4180 record reader. Returns false at end of input. Quoted fields may
// contain commas, doubled quotes and line breaks.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      break;
    } else {
      field.push_back(c);
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

inline std::optional<double> parse_real(std::string_view cell) {
  const std::string t = trim(cell);
  if (t.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads a header-first CSV. Any row with a missing or unparseable attribute
/// cell fails the load with `parse_error`; rows are never imputed.
inline Dataset load_dataset(std::istream& csv, const Schema& schema) {
  schema.validate();
  std::vector<std::string> fields;
  if (!detail::read_csv_record(csv, fields)) throw Error(errc::kEmptyDataset, "CSV has no header row");
  if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);

  std::unordered_map<std::string, std::size_t> header;
  for (std::size_t i = 0; i < fields.size(); ++i) header.emplace(detail::trim(fields[i]), i);
  auto column = [&](const std::string& name) {
    auto it = header.find(name);
    if (it == header.end()) throw Error(errc::kMissingColumn, "missing column '" + name + "'");
    return it->second;
  };

  const std::size_t id_col = column(schema.id_column);
  const std::optional<std::size_t> name_col =
      schema.name_column ? std::optional<std::size_t>(column(*schema.name_column)) : std::nullopt;
  const auto attrs = schema.attributes();
  std::vector<std::size_t> attr_cols;
  for (const auto& a : attrs) attr_cols.push_back(column(a));

  std::vector<Unit> units;
  std::unordered_set<std::string> ids;
  std::size_t row = 0;
  while (detail::read_csv_record(csv, fields)) {
    ++row;
    if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;  // blank line
    auto cell = [&](std::size_t col, const std::string& name) -> const std::string& {
      if (col >= fields.size()) {
        throw Error(errc::kParseError, "row " + std::to_string(row) + ", column '" + name + "': missing cell");
      }
      return fields[col];
    };
    Unit u;
    u.id = detail::trim(cell(id_col, schema.id_column));
    if (u.id.empty()) {
      throw Error(errc::kParseError, "row " + std::to_string(row) + ", column '" + schema.id_column + "': empty id");
    }
    u.name = name_col ? detail::trim(cell(*name_col, *schema.name_column)) : u.id;
    u.values.reserve(attrs.size());
    for (std::size_t a = 0; a < attrs.size(); ++a) {
      auto v = detail::parse_real(cell(attr_cols[a], attrs[a]));
      if (!v) {
        throw Error(errc::kParseError, "row " + std::to_string(row) + ", column '" + attrs[a] +
                                           "': not a finite real number");
      }
      u.values.push_back(*v);
    }
    if (!ids.insert(u.id).second) throw Error(errc::kDuplicateId, "duplicate unit id '" + u.id + "'");
    units.push_back(std::move(u));
  }
  if (units.empty()) throw Error(errc::kEmptyDataset, "CSV has no data rows");
  return Dataset(schema, std::move(units));
}

inline Dataset load_dataset(std::string_view csv_text, const Schema& schema) {
  std::istringstream in{std::string(csv_text)};
  return load_dataset(in, schema);
}

/// (x - mean) / sd per coordinate; coordinates with sd == 0 map to 0.
/// Accepts any prefix of the attribute vector (e.g. treatments only).
inline std::vector<double> standardize(std::span<const double> v, const AttributeStats& stats) {
  if (v.size() > stats.mean.size()) throw Error(errc::kShapeMismatch, "standardize: vector too long");
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    out[j] = stats.sd[j] > 0.0 ? (v[j] - stats.mean[j]) / stats.sd[j] : 0.0;
  }
  return out;
}

inline std::vector<double> destandardize(std::span<const double> z, const AttributeStats& stats) {
  if (z.size() > stats.mean.size()) throw Error(errc::kShapeMismatch, "destandardize: vector too long");
  std::vector<double> out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) out[j] = stats.mean[j] + z[j] * stats.sd[j];
  return out;
}

struct OutcomeExtent {
  double min = 0.0;
  double max = 0.0;
  double midpoint = 0.0;
};

/// Observed outcome range; the neutral midpoint defaults to the median.
inline OutcomeExtent outcome_extent(const Dataset& ds, std::optional<double> midpoint = std::nullopt) {
  if (ds.size() == 0) throw Error(errc::kEmptyDataset, "dataset has no rows");
  const std::size_t oi = ds.schema().outcome_index();
  std::vector<double> ys;
  ys.reserve(ds.size());
  for (const auto& u : ds.units()) ys.push_back(u.values[oi]);
  std::sort(ys.begin(), ys.end());
  OutcomeExtent e;
  e.min = ys.front();
  e.max = ys.back();
  if (midpoint) {
    e.midpoint = *midpoint;
  } else {
    const std::size_t n = ys.size();
    e.midpoint = n % 2 == 1 ? ys[n / 2] : 0.5 * (ys[n / 2 - 1] + ys[n / 2]);
  }
  return e;
}

}  // namespace whatif
