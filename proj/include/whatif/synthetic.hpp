#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "whatif/causal_graph.hpp"
#include "whatif/dataset.hpp"
#include "whatif/json_io.hpp"

// Synthetic county datasets with the attribute layouts of the opioid and
// election case studies. Values come from known linear SCMs; nothing here is
// real county data.
namespace whatif::synthetic {

struct Fixture {
  std::string name;
  Schema schema;
  std::vector<Unit> units;
  GraphSpec graph;
  std::optional<double> midpoint;
  std::vector<std::pair<int, int>> grid;  // map cell per unit, for geometry
};

namespace detail {

inline std::string county_id(int state, int county) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02d%03d", state, county);
  return buf;
}

inline double round_to(double v, double step) { return std::round(v / step) * step; }

}  // namespace detail

/// 3,000 counties, 10 treatments + opioid death rate. The causal chain
/// insufficient sleep -> mentally unhealthy days -> death rate is built in.
inline Fixture opioid(std::size_t units = 3000, std::uint64_t seed = 20240601) {
  Fixture f;
  f.name = "opioid";
  f.schema.id_column = "fips";
  f.schema.name_column = "county";
  f.schema.outcome = "opioid_death_rate";
  f.schema.treatments = {"food_environment_index", "primary_care_physicians_rate", "violent_crime_rate",
                         "hiv_prevalence_rate",    "education_index",              "poverty_index",
                         "pct_insufficient_sleep", "mentally_unhealthy_days",      "pct_frequent_physical_distress",
                         "opioid_dispensing_rate"};
  f.graph.nodes = f.schema.attributes();
  f.graph.outcome = f.schema.outcome;
  f.graph.edges = {{"education_index", "poverty_index"},
                   {"poverty_index", "violent_crime_rate"},
                   {"poverty_index", "hiv_prevalence_rate"},
                   {"poverty_index", "pct_insufficient_sleep"},
                   {"poverty_index", "mentally_unhealthy_days"},
                   {"pct_insufficient_sleep", "mentally_unhealthy_days"},
                   {"mentally_unhealthy_days", "pct_frequent_physical_distress"},
                   {"primary_care_physicians_rate", "opioid_dispensing_rate"},
                   {"mentally_unhealthy_days", "opioid_death_rate"},
                   {"opioid_dispensing_rate", "opioid_death_rate"},
                   {"hiv_prevalence_rate", "opioid_death_rate"},
                   {"violent_crime_rate", "opioid_death_rate"},
                   {"education_index", "opioid_death_rate"},
                   {"food_environment_index", "opioid_death_rate"}};

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::size_t i = 0; i < units; ++i) {
    const int state = static_cast<int>(i / 60) + 1;
    const int county = static_cast<int>(i % 60) * 2 + 1;
    const double food = 7.5 + 1.0 * z(rng);
    const double pcp = std::max(5.0, 55.0 + 20.0 * z(rng));
    const double edu = 1.5 + 0.5 * z(rng);
    const double poverty = 30.0 - 6.0 * edu + 3.0 * z(rng);
    const double crime = std::max(0.0, 100.0 + 12.0 * poverty + 60.0 * z(rng));
    const double hiv = std::max(0.0, 50.0 + 5.0 * poverty + 40.0 * z(rng));
    const double sleep = 25.0 + 0.4 * poverty + 2.5 * z(rng);
    const double mental = 0.5 + 0.12 * sleep + 0.05 * poverty + 0.3 * z(rng);
    const double distress = 4.0 + 1.8 * mental + 0.8 * z(rng);
    const double dispensing = std::max(5.0, 70.0 - 0.2 * pcp + 15.0 * z(rng));
    const double death = -12.0 + 4.0 * mental + 0.08 * dispensing + 0.02 * hiv + 0.01 * crime - 2.0 * edu -
                         0.3 * food + 1.5 * z(rng);
    Unit u;
    u.id = detail::county_id(state, county);
    u.name = "County " + std::to_string(county) + ", State " + std::to_string(state);
    for (double v : {food, pcp, crime, hiv, edu, poverty, sleep, mental, distress, dispensing, death}) {
      u.values.push_back(detail::round_to(v, 1e-4));
    }
    f.units.push_back(std::move(u));
    f.grid.emplace_back(static_cast<int>(i % 60), static_cast<int>(i / 60));
  }
  return f;
}

/// 9 treatments + signed vote difference (positive leans Party B), neutral at 0.
inline Fixture election(std::size_t units = 3000, std::uint64_t seed = 20161108) {
  Fixture f;
  f.name = "election";
  f.schema.id_column = "fips";
  f.schema.name_column = "county";
  f.schema.outcome = "vote_pct_difference";
  f.schema.treatments = {"pct_rural",          "pct_minority",          "pct_physically_inactive",
                         "pct_own_home",       "num_unemployment",      "pct_age_65_plus",
                         "violent_crimes_per_100k", "education_index", "pct_black"};
  f.midpoint = 0.0;
  f.graph.nodes = f.schema.attributes();
  f.graph.outcome = f.schema.outcome;
  f.graph.edges = {{"pct_rural", "pct_age_65_plus"},
                   {"pct_rural", "pct_own_home"},
                   {"pct_minority", "pct_own_home"},
                   {"pct_minority", "pct_black"},
                   {"pct_rural", "education_index"},
                   {"education_index", "num_unemployment"},
                   {"pct_rural", "pct_physically_inactive"},
                   {"education_index", "pct_physically_inactive"},
                   {"pct_minority", "violent_crimes_per_100k"},
                   {"pct_rural", "vote_pct_difference"},
                   {"pct_minority", "vote_pct_difference"},
                   {"pct_own_home", "vote_pct_difference"},
                   {"pct_age_65_plus", "vote_pct_difference"},
                   {"education_index", "vote_pct_difference"},
                   {"pct_black", "vote_pct_difference"},
                   {"num_unemployment", "vote_pct_difference"}};

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::size_t i = 0; i < units; ++i) {
    const int state = static_cast<int>(i / 60) + 1;
    const int county = static_cast<int>(i % 60) * 2 + 1;
    const double rural = std::clamp(58.0 + 28.0 * z(rng), 0.0, 100.0);
    const double minority = std::clamp(22.0 + 16.0 * z(rng), 1.0, 99.0);
    const double black = std::max(0.0, 0.35 * minority + 4.0 * z(rng));
    const double age65 = 14.0 + 0.06 * rural + 3.0 * z(rng);
    const double own = 60.0 + 0.15 * rural - 0.2 * minority + 5.0 * z(rng);
    const double edu = 2.4 - 0.008 * rural + 0.4 * z(rng);
    const double unemployment = std::max(0.0, 6.0 - 0.8 * edu + 1.5 * z(rng));
    const double inactive = 20.0 + 0.06 * rural - 2.0 * edu + 3.0 * z(rng);
    const double crime = std::max(0.0, 200.0 + 3.0 * minority + 100.0 * z(rng));
    const double vote = -20.0 + 0.45 * rural - 0.9 * minority - 0.5 * black + 0.6 * own + 0.8 * age65 - 8.0 * edu +
                        1.0 * unemployment + 6.0 * z(rng);
    Unit u;
    u.id = detail::county_id(state, county);
    u.name = "County " + std::to_string(county) + ", State " + std::to_string(state);
    for (double v : {rural, minority, inactive, own, unemployment, age65, crime, edu, black, vote}) {
      u.values.push_back(detail::round_to(v, 1e-4));
    }
    f.units.push_back(std::move(u));
    f.grid.emplace_back(static_cast<int>(i % 60), static_cast<int>(i / 60));
  }
  return f;
}

/// A -> B -> Y with four off-line units whose residuals are orthogonal to
/// the regressors, so a fit over all seven units gives B = 2A and Y = 3B.
inline Fixture chain() {
  Fixture f;
  f.name = "chain";
  f.schema.id_column = "id";
  f.schema.outcome = "Y";
  f.schema.treatments = {"A", "B"};
  f.graph = {{"A", "B", "Y"}, {{"A", "B"}, {"B", "Y"}}, "Y"};
  const std::vector<std::pair<std::string, std::vector<double>>> rows = {
      {"u1", {1, 2.5, 8}},  {"u2", {1, 1.5, 4}}, {"u3", {2, 4.5, 13}}, {"u4", {2, 3.5, 11}},
      {"u5", {0, 0, 0}},    {"u6", {3, 6, 18}},  {"u7", {-1, -2, -6}}};
  int k = 0;
  for (const auto& [id, v] : rows) {
    f.units.push_back({id, id, v});
    f.grid.emplace_back(k++, 0);
  }
  return f;
}

/// A -> Y with y = 2a on a = 0..4.
inline Fixture line() {
  Fixture f;
  f.name = "line";
  f.schema.id_column = "id";
  f.schema.outcome = "Y";
  f.schema.treatments = {"A"};
  f.graph = {{"A", "Y"}, {{"A", "Y"}}, "Y"};
  for (int a = 0; a <= 4; ++a) {
    f.units.push_back({"p" + std::to_string(a), "p" + std::to_string(a), {double(a), 2.0 * a}});
    f.grid.emplace_back(a, 0);
  }
  return f;
}

/// Three counties, one treatment.
inline Fixture tiny() {
  Fixture f;
  f.name = "tiny";
  f.schema.id_column = "id";
  f.schema.name_column = "name";
  f.schema.outcome = "outcome";
  f.schema.treatments = {"poverty"};
  f.graph = {{"poverty", "outcome"}, {{"poverty", "outcome"}}, "outcome"};
  f.units = {{"01001", "Alpha County", {12.5, 3.0}}, {"01003", "Beta County", {18.0, 5.5}},
             {"01005", "Gamma County", {9.0, 1.0}}};
  f.grid = {{0, 0}, {1, 0}, {2, 0}};
  return f;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

inline void write_csv(std::ostream& out, const Fixture& f) {
  out << detail::csv_field(f.schema.id_column);
  if (f.schema.name_column) out << ',' << detail::csv_field(*f.schema.name_column);
  for (const auto& a : f.schema.attributes()) out << ',' << detail::csv_field(a);
  out << '\n';
  char buf[32];
  for (const auto& u : f.units) {
    out << detail::csv_field(u.id);
    if (f.schema.name_column) out << ',' << detail::csv_field(u.name);
    for (double v : u.values) {
      std::snprintf(buf, sizeof buf, "%.10g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

inline json graph_json(const Fixture& f) {
  json edges = json::array();
  for (const auto& [p, c] : f.graph.edges) edges.push_back({p, c});
  return json{{"nodes", f.graph.nodes}, {"edges", edges}, {"outcome", f.graph.outcome}};
}

/// One square polygon per unit on a lon/lat grid, keyed by property "id".
inline json geojson(const Fixture& f) {
  json features = json::array();
  for (std::size_t i = 0; i < f.units.size(); ++i) {
    const double x0 = -124.0 + 0.95 * f.grid[i].first;
    const double y0 = 25.0 + 0.45 * f.grid[i].second;
    const double x1 = x0 + 0.95;
    const double y1 = y0 + 0.45;
    json ring = json::array({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}});
    features.push_back({{"type", "Feature"},
                        {"properties", {{"id", f.units[i].id}, {"name", f.units[i].name}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}}});
  }
  return json{{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace whatif::synthetic
