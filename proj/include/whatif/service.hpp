#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "whatif/causal_graph.hpp"
#include "whatif/dataset.hpp"
#include "whatif/error.hpp"
#include "whatif/json_io.hpp"
#include "whatif/lime.hpp"
#include "whatif/scm.hpp"
#include "whatif/shap.hpp"
#include "whatif/subgroup.hpp"

namespace whatif {

struct ServiceConfig {
  std::string data_path;
  std::string schema_path;
  std::string graph_path;
  std::optional<std::string> geo_path;
  std::string geo_id_property = "id";
  std::string host = "127.0.0.1";
  int port = 8080;
  LshParams lsh;
  LimeConfig lime;
  std::string shap_background = "subgroup";  // "subgroup" | "global"
  std::size_t default_n = 10;
  std::size_t grid_size = 11;
  std::size_t n_background = 20;  // global explanation background rows
  std::uint64_t background_seed = 42;
  std::optional<double> midpoint;

  void validate() const {
    if (port < 1 || port > 65535) throw Error(errc::kConfigError, "port must be in [1, 65535]");
    if (shap_background != "subgroup" && shap_background != "global") {
      throw Error(errc::kConfigError, "shap_background must be 'subgroup' or 'global'");
    }
    if (default_n < 1) throw Error(errc::kConfigError, "default_n must be at least 1");
    if (grid_size < 2) throw Error(errc::kConfigError, "grid_size must be at least 2");
    if (n_background < 1) throw Error(errc::kConfigError, "n_background must be at least 1");
  }
};

/// Reads a config file. Relative paths resolve against the file's directory.
inline ServiceConfig config_from_json(const json& j, const std::filesystem::path& base = {}) {
  ServiceConfig c;
  auto path = [&](const json& v) {
    std::filesystem::path p = v.get<std::string>();
    return (p.is_relative() && !base.empty() ? base / p : p).string();
  };
  try {
    if (j.contains("data_path")) c.data_path = path(j["data_path"]);
    if (j.contains("schema_path")) c.schema_path = path(j["schema_path"]);
    if (j.contains("graph_path")) c.graph_path = path(j["graph_path"]);
    if (j.contains("geo_path") && !j["geo_path"].is_null()) c.geo_path = path(j["geo_path"]);
    c.geo_id_property = j.value("geo_id_property", c.geo_id_property);
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    if (j.contains("lsh")) {
      const auto& l = j["lsh"];
      c.lsh.tables = l.value("tables", c.lsh.tables);
      c.lsh.bits = l.value("bits", c.lsh.bits);
      c.lsh.seed = l.value("seed", c.lsh.seed);
      c.lsh.probes = l.value("probes", c.lsh.probes);
    }
    if (j.contains("lime")) {
      const auto& l = j["lime"];
      c.lime.n_samples = l.value("n_samples", c.lime.n_samples);
      if (l.contains("kernel_width") && !l["kernel_width"].is_null()) c.lime.kernel_width = l["kernel_width"].get<double>();
      c.lime.seed = l.value("seed", c.lime.seed);
    }
    c.shap_background = j.value("shap_background", c.shap_background);
    c.default_n = j.value("default_n", c.default_n);
    c.grid_size = j.value("grid_size", c.grid_size);
    c.n_background = j.value("n_background", c.n_background);
    c.background_seed = j.value("background_seed", c.background_seed);
    if (j.contains("midpoint") && !j["midpoint"].is_null()) c.midpoint = j["midpoint"].get<double>();
  } catch (const json::exception& e) {
    throw Error(errc::kConfigError, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ServiceConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(errc::kConfigError, "cannot open config file '" + file.string() + "'");
  try {
    return config_from_json(json::parse(in), file.parent_path());
  } catch (const json::parse_error& e) {
    throw Error(errc::kConfigError, std::string("config: ") + e.what());
  }
}

inline std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::kConfigError, std::string("cannot open ") + what + " file '" + path + "'");
  return in;
}

/// Shared immutable state plus one pure handler per API route. Handlers take
/// and return JSON and throw `Error`; transports map codes to statuses.
class Service {
 public:
  explicit Service(ServiceConfig config) : config_(std::move(config)) {
    config_.validate();
    auto schema_in = open_input(config_.schema_path, "schema");
    Schema schema = parse_schema(schema_in);
    auto data_in = open_input(config_.data_path, "data");
    dataset_.emplace(load_dataset(data_in, schema));
    auto graph_in = open_input(config_.graph_path, "graph");
    graph_ = bind_graph(parse_graph_spec(graph_in), schema);
    if (config_.geo_path) scan_geo();
    finish_setup();
  }

  Service(ServiceConfig config, Dataset dataset, CausalGraph graph)
      : config_(std::move(config)), dataset_(std::move(dataset)), graph_(std::move(graph)) {
    config_.validate();
    if (config_.geo_path) scan_geo();
    finish_setup();
  }

  const ServiceConfig& config() const { return config_; }
  const Dataset& dataset() const { return *dataset_; }
  const CausalGraph& graph() const { return graph_; }
  const LshIndex& index() const { return index_; }
  const FittedSCM& global_model() const { return global_model_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // GET /api/config
  json get_config() const {
    const auto& schema = dataset().schema();
    json defaults;
    defaults["n"] = config_.default_n;
    defaults["grid_size"] = config_.grid_size;
    defaults["n_background"] = config_.n_background;
    defaults["background_seed"] = config_.background_seed;
    defaults["shap_background"] = config_.shap_background;
    defaults["lsh"] = {{"tables", config_.lsh.tables}, {"bits", config_.lsh.bits}, {"seed", config_.lsh.seed}, {"probes", config_.lsh.probes}};
    defaults["lime"] = {{"n_samples", config_.lime.n_samples},
                        {"kernel_width", config_.lime.kernel_width.value_or(default_kernel_width(schema.treatments.size()))},
                        {"seed", config_.lime.seed}};
    json j;
    j["schema"] = schema_to_json(schema);
    j["attributes"] = schema.attributes();
    j["treatments"] = schema.treatments;
    j["outcome"] = schema.outcome;
    j["unit_count"] = dataset().size();
    j["graph"] = graph_to_json(graph_);
    j["has_geo"] = config_.geo_path.has_value();
    j["defaults"] = defaults;
    j["warnings"] = warnings_;
    return j;
  }

  // GET /api/units
  json get_units() const {
    const std::size_t oi = dataset().schema().outcome_index();
    json units = json::array();
    for (const auto& u : dataset().units()) units.push_back({{"id", u.id}, {"name", u.name}, {"outcome", u.values[oi]}});
    const auto ext = outcome_extent(dataset(), config_.midpoint);
    return json{{"outcome", dataset().schema().outcome},
                {"units", std::move(units)},
                {"extent", {{"min", ext.min}, {"max", ext.max}, {"midpoint", ext.midpoint}}}};
  }

  // GET /api/units/{id}/neighbors?n=N
  json get_neighbors(const std::string& unit_id, std::optional<std::int64_t> n) const {
    const Unit& center = dataset().unit(unit_id);
    const auto sg = subgroup(unit_id, checked_n(n.value_or(static_cast<std::int64_t>(config_.default_n))));
    json neighbors = json::array();
    for (std::size_t i = 0; i < sg.neighbor_ids.size(); ++i) {
      const Unit& u = dataset().unit(sg.neighbor_ids[i]);
      neighbors.push_back({{"id", u.id}, {"name", u.name}, {"distance", sg.distances[i]}, {"values", u.values}});
    }
    return json{{"center", {{"id", center.id}, {"name", center.name}, {"values", center.values}}},
                {"n", sg.n},
                {"attributes", dataset().schema().attributes()},
                {"neighbors", std::move(neighbors)},
                {"ranges", ranges_json(sg.ranges)}};
  }

  // POST /api/intervene
  json post_intervene(const json& body) const {
    const std::string unit_id = field<std::string>(body, "unit_id");
    const std::size_t n = checked_n(field<std::int64_t>(body, "n"));
    const std::string attribute = field<std::string>(body, "attribute");
    const double value = finite_field(body, "value");
    if (!dataset().schema().is_treatment(attribute)) {
      throw Error(errc::kNotATreatment, "'" + attribute + "' is not a treatment attribute");
    }
    const Unit& unit = dataset().unit(unit_id);
    const auto sg = subgroup(unit_id, n);
    const auto scm = fit_scm(graph_, subgroup_members(dataset(), sg));
    const auto cf = intervene(scm, unit, attribute, value);
    return json{{"unit_id", cf.unit_id},
                {"n", n},
                {"attributes", dataset().schema().attributes()},
                {"intervened_attribute", cf.intervened_attribute},
                {"intervention_value", cf.intervention_value},
                {"factual", cf.factual},
                {"counterfactual", cf.counterfactual},
                {"residuals", cf.residuals},
                {"changed", cf.changed},
                {"descendants", descendants(graph_, std::string_view(attribute))},
                {"subgroup", {{"neighbor_ids", sg.neighbor_ids}, {"ranges", ranges_json(sg.ranges)}}}};
  }

  // POST /api/explain/lime
  json post_explain_lime(const json& body) const {
    const std::string unit_id = field<std::string>(body, "unit_id");
    const std::size_t n = checked_n(field<std::int64_t>(body, "n"));
    const json overrides = body.contains("overrides") && body["overrides"].is_object() ? body["overrides"] : json::object();
    LimeConfig cfg = config_.lime;
    try {
      if (overrides.contains("n_samples")) cfg.n_samples = overrides["n_samples"].get<std::size_t>();
      if (overrides.contains("kernel_width")) cfg.kernel_width = overrides["kernel_width"].get<double>();
      if (overrides.contains("seed")) cfg.seed = overrides["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw Error(errc::kBadRequest, std::string("overrides: ") + e.what());
    }

    const auto sg = subgroup(unit_id, n);
    const auto members = subgroup_members(dataset(), sg);
    const auto model = outcome_model(fit_scm(graph_, members));
    const auto x = explained_values(unit_id, overrides);
    const std::size_t d = dataset().treatment_count();
    const std::vector<double> scale(dataset().stats().sd.begin(), dataset().stats().sd.begin() + static_cast<std::ptrdiff_t>(d));
    const auto e = lime_explain(model, x, scale, cfg);
    const auto reference = member_means(members);
    const auto& names = dataset().schema().treatments;

    json bars = json::array();
    for (const auto& b : lime_bar_data(e, x, reference, names)) {
      bars.push_back({{"feature", b.feature}, {"contribution", b.contribution}, {"direction", b.positive ? "positive" : "negative"}});
    }
    return json{{"unit_id", unit_id},
                {"n", n},
                {"method", "lime"},
                {"features", names},
                {"feature_values", x},
                {"reference", reference},
                {"prediction", e.prediction},
                {"interval", {{"low", e.interval.first}, {"high", e.interval.second}}},
                {"coefficients", e.coefficients},
                {"intercept", e.intercept},
                {"r2", e.r2},
                {"degenerate", e.degenerate},
                {"n_samples", e.n_samples},
                {"kernel_width", e.kernel_width},
                {"seed", e.seed},
                {"bars", std::move(bars)}};
  }

  // POST /api/explain/shap
  json post_explain_shap(const json& body) const {
    const std::string unit_id = field<std::string>(body, "unit_id");
    const std::size_t n = checked_n(field<std::int64_t>(body, "n"));
    const json overrides = body.contains("overrides") && body["overrides"].is_object() ? body["overrides"] : json::object();
    const auto sg = subgroup(unit_id, n);
    const auto members = subgroup_members(dataset(), sg);
    const auto model = outcome_model(fit_scm(graph_, members));
    const auto x = explained_values(unit_id, overrides);
    const Matrix background = config_.shap_background == "global" ? treatment_rows(dataset().units()) : treatment_rows(members);
    const auto e = shap_exact(model, x, background);
    const auto& names = dataset().schema().treatments;

    json steps = json::array();
    for (const auto& s : waterfall_data(e, names)) steps.push_back({{"feature", s.feature}, {"start", s.start}, {"end", s.end}});
    return json{{"unit_id", unit_id},
                {"n", n},
                {"method", "shap"},
                {"background", config_.shap_background},
                {"features", names},
                {"feature_values", e.feature_values},
                {"baseline", e.baseline},
                {"prediction", e.prediction},
                {"attributions", e.attributions},
                {"waterfall", std::move(steps)}};
  }

  // GET /api/explain/global?n_background=K
  json get_explain_global(std::optional<std::int64_t> k) const {
    const std::int64_t kk = k.value_or(static_cast<std::int64_t>(config_.n_background));
    if (kk < 1 || kk > static_cast<std::int64_t>(dataset().size())) {
      throw Error(errc::kBadK, "n_background must be in [1, " + std::to_string(dataset().size()) + "]");
    }
    std::vector<Unit> sample;
    for (std::size_t i : sample_indices(dataset().size(), static_cast<std::size_t>(kk), config_.background_seed)) {
      sample.push_back(dataset().units()[i]);
    }
    const auto model = outcome_model(global_model_);
    const auto& names = dataset().schema().treatments;
    const auto g = shap_global(model, treatment_rows(dataset().units()), treatment_rows(sample), names);

    json order = json::array();
    for (std::size_t j : g.feature_order) order.push_back(names[j]);
    json ids = json::array();
    for (const auto& u : dataset().units()) ids.push_back(u.id);
    return json{{"features", names},
                {"feature_order", std::move(order)},
                {"mean_abs", g.mean_abs},
                {"baseline", g.baseline},
                {"n_background", kk},
                {"seed", config_.background_seed},
                {"units", std::move(ids)},
                {"matrix", g.matrix},
                {"feature_values", g.feature_values}};
  }

  // POST /api/recommend
  json post_recommend(const json& body) const {
    const std::string unit_id = field<std::string>(body, "unit_id");
    const std::size_t n = checked_n(field<std::int64_t>(body, "n"));
    const double target = finite_field(body, "target");
    std::size_t grid = config_.grid_size;
    if (body.contains("grid_size")) {
      const auto g = field<std::int64_t>(body, "grid_size");
      if (g < 2) throw Error(errc::kInvalidArgument, "grid_size must be at least 2");
      grid = static_cast<std::size_t>(g);
    }
    const Unit& unit = dataset().unit(unit_id);
    const auto sg = subgroup(unit_id, n);
    const auto scm = fit_scm(graph_, subgroup_members(dataset(), sg));
    json recs = json::array();
    for (const auto& r : recommend_interventions(scm, unit, sg.ranges, target, grid)) {
      recs.push_back({{"attribute", r.attribute}, {"value", r.value}, {"predicted_outcome", r.predicted_outcome}, {"distance", r.distance}});
    }
    return json{{"unit_id", unit_id},
                {"n", n},
                {"target", target},
                {"grid_size", grid},
                {"factual_outcome", unit.values[dataset().schema().outcome_index()]},
                {"recommendations", std::move(recs)}};
  }

  Subgroup subgroup(const std::string& unit_id, std::size_t n) const {
    return nearest_neighbors(index_, dataset(), unit_id, n);
  }

  /// Deterministic sample of k distinct indices (partial Fisher-Yates), ascending.
  static std::vector<std::size_t> sample_indices(std::size_t population, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(population);
    for (std::size_t i = 0; i < population; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < k && i + 1 < population; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (population - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
  }

 private:
  void finish_setup() {
    for (const auto& w : dataset().warnings()) warnings_.push_back(w);
    index_ = build_index(dataset(), config_.lsh);
    global_model_ = fit_scm(graph_, dataset().units());
  }

  // Reads the boundary file once to check the id join; the body itself is
  // streamed from disk on request.
  void scan_geo() {
    auto in = open_input(*config_.geo_path, "geo");
    json geo;
    try {
      geo = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(errc::kConfigError, std::string("geo: ") + e.what());
    }
    if (!geo.is_object() || !geo.contains("features") || !geo["features"].is_array()) {
      throw Error(errc::kConfigError, "geo: expected a GeoJSON FeatureCollection");
    }
    std::unordered_set<std::string> with_geometry;
    std::size_t unmatched = 0;
    for (const auto& f : geo["features"]) {
      std::string id;
      if (f.contains("properties") && f["properties"].is_object() && f["properties"].contains(config_.geo_id_property)) {
        const auto& v = f["properties"][config_.geo_id_property];
        id = v.is_string() ? v.get<std::string>() : v.dump();
      } else if (f.contains("id")) {
        id = f["id"].is_string() ? f["id"].get<std::string>() : f["id"].dump();
      }
      if (id.empty() || !dataset().find(id)) {
        if (++unmatched <= 20) warnings_.push_back("geo feature '" + id + "' has no matching unit");
      } else {
        with_geometry.insert(id);
      }
    }
    if (unmatched > 20) warnings_.push_back(std::to_string(unmatched - 20) + " more geo features have no matching unit");
    std::size_t missing = 0;
    for (const auto& u : dataset().units()) {
      if (!with_geometry.count(u.id) && ++missing <= 20) warnings_.push_back("unit '" + u.id + "' has no geometry");
    }
    if (missing > 20) warnings_.push_back(std::to_string(missing - 20) + " more units have no geometry");
  }

  std::size_t checked_n(std::int64_t n) const {
    const auto limit = static_cast<std::int64_t>(dataset().size()) - 1;
    if (n < 1 || n > limit) throw Error(errc::kBadN, "n must be in [1, " + std::to_string(limit) + "]");
    return static_cast<std::size_t>(n);
  }

  template <class T>
  static T field(const json& body, const char* name) {
    if (!body.is_object() || !body.contains(name)) throw Error(errc::kBadRequest, std::string("missing field '") + name + "'");
    const auto& v = body[name];
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw Error(errc::kBadRequest, std::string("field '") + name + "' must be a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw Error(errc::kBadRequest, std::string("field '") + name + "' must be an integer");
    }
    return v.get<T>();
  }

  static double finite_field(const json& body, const char* name) {
    if (!body.is_object() || !body.contains(name) || !body[name].is_number()) {
      throw Error(errc::kBadRequest, std::string("field '") + name + "' must be a number");
    }
    const double v = body[name].get<double>();
    if (!std::isfinite(v)) throw Error(errc::kBadRequest, std::string("field '") + name + "' must be finite");
    return v;
  }

  // The unit's treatment values with optional {"values": {attr: v}} edits.
  std::vector<double> explained_values(const std::string& unit_id, const json& overrides) const {
    const Unit& u = dataset().unit(unit_id);
    const auto& schema = dataset().schema();
    std::vector<double> x(u.values.begin(), u.values.begin() + static_cast<std::ptrdiff_t>(schema.treatments.size()));
    if (overrides.contains("values")) {
      const auto& vals = overrides["values"];
      if (!vals.is_object()) throw Error(errc::kBadRequest, "overrides.values must be an object");
      for (auto it = vals.begin(); it != vals.end(); ++it) {
        if (!schema.is_treatment(it.key())) throw Error(errc::kNotATreatment, "'" + it.key() + "' is not a treatment attribute");
        if (!it.value().is_number() || !std::isfinite(it.value().get<double>())) {
          throw Error(errc::kBadRequest, "override for '" + it.key() + "' must be a finite number");
        }
        x[*schema.attribute_index(it.key())] = it.value().get<double>();
      }
    }
    return x;
  }

  Matrix treatment_rows(std::span<const Unit> units) const {
    const auto d = static_cast<std::ptrdiff_t>(dataset().treatment_count());
    Matrix rows;
    rows.reserve(units.size());
    for (const auto& u : units) rows.emplace_back(u.values.begin(), u.values.begin() + d);
    return rows;
  }

  std::vector<double> member_means(std::span<const Unit> members) const {
    const std::size_t d = dataset().treatment_count();
    std::vector<double> m(d, 0.0);
    for (const auto& u : members) {
      for (std::size_t j = 0; j < d; ++j) m[j] += u.values[j];
    }
    for (auto& v : m) v /= static_cast<double>(members.size());
    return m;
  }

  json ranges_json(const std::vector<std::pair<double, double>>& ranges) const {
    const auto attrs = dataset().schema().attributes();
    json out = json::array();
    for (std::size_t j = 0; j < ranges.size(); ++j) {
      out.push_back({{"attribute", attrs[j]}, {"min", ranges[j].first}, {"max", ranges[j].second}});
    }
    return out;
  }

  ServiceConfig config_;
  std::optional<Dataset> dataset_;
  CausalGraph graph_;
  LshIndex index_;
  FittedSCM global_model_;
  std::vector<std::string> warnings_;
};

/// HTTP status for an engine error code.
inline int http_status(const std::string& code) {
  if (code == errc::kUnknownUnit || code == errc::kNoGeometry || code == errc::kNotFound) return 404;
  if (code == errc::kInsufficientData) return 422;
  if (code == errc::kBadN || code == errc::kBadK || code == errc::kNotATreatment || code == errc::kBadRequest ||
      code == errc::kInvalidArgument || code == errc::kShapeMismatch || code == errc::kTooManyFeatures) {
    return 400;
  }
  return 500;
}

}  // namespace whatif
