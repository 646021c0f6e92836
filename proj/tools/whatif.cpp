// whatif: serve the what-if API or run one-shot analyses.
//
// Exit codes: 0 success, 1 usage error, 2 data or model error.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "whatif.hpp"
#include "whatif/http.hpp"

namespace {

using whatif::json;

struct Flags {
  std::string config;
  std::string data, schema, graph, geo, geo_id_property, host, shap_background;
  std::optional<int> port;
  std::optional<std::size_t> lsh_tables, lsh_bits, lsh_probes, lime_samples, default_n, grid_size, n_background;
  std::optional<std::uint64_t> lsh_seed, lime_seed, background_seed;
  std::optional<double> lime_kernel_width, midpoint;
};

void add_service_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file (flags override its fields)");
  app->add_option("--data", f.data, "dataset CSV");
  app->add_option("--schema", f.schema, "schema JSON");
  app->add_option("--graph", f.graph, "causal graph JSON");
  app->add_option("--geo", f.geo, "GeoJSON boundaries");
  app->add_option("--geo-id-property", f.geo_id_property, "GeoJSON property holding the unit id");
  app->add_option("--lsh-tables", f.lsh_tables, "LSH table count");
  app->add_option("--lsh-bits", f.lsh_bits, "hyperplanes per LSH table");
  app->add_option("--lsh-seed", f.lsh_seed, "LSH seed");
  app->add_option("--lsh-probes", f.lsh_probes, "extra buckets probed per LSH table");
  app->add_option("--lime-samples", f.lime_samples, "default LIME sample count");
  app->add_option("--lime-kernel-width", f.lime_kernel_width, "default LIME kernel width");
  app->add_option("--lime-seed", f.lime_seed, "default LIME seed");
  app->add_option("--shap-background", f.shap_background, "subgroup | global");
  app->add_option("--n-background", f.n_background, "global explanation background rows");
  app->add_option("--background-seed", f.background_seed, "global explanation background seed");
  app->add_option("--midpoint", f.midpoint, "neutral outcome value for the map");
  app->add_option("--default-n", f.default_n, "default neighbor count");
  app->add_option("--grid-size", f.grid_size, "recommendation grid size");
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

whatif::ServiceConfig make_config(const Flags& f) {
  whatif::ServiceConfig c = f.config.empty() ? whatif::ServiceConfig{} : whatif::load_config(f.config);
  if (!f.data.empty()) c.data_path = f.data;
  if (!f.schema.empty()) c.schema_path = f.schema;
  if (!f.graph.empty()) c.graph_path = f.graph;
  if (!f.geo.empty()) c.geo_path = f.geo;
  if (!f.geo_id_property.empty()) c.geo_id_property = f.geo_id_property;
  if (!f.host.empty()) c.host = f.host;
  if (f.port) c.port = *f.port;
  if (f.lsh_tables) c.lsh.tables = *f.lsh_tables;
  if (f.lsh_bits) c.lsh.bits = *f.lsh_bits;
  if (f.lsh_seed) c.lsh.seed = *f.lsh_seed;
  if (f.lsh_probes) c.lsh.probes = *f.lsh_probes;
  if (f.lime_samples) c.lime.n_samples = *f.lime_samples;
  if (f.lime_kernel_width) c.lime.kernel_width = *f.lime_kernel_width;
  if (f.lime_seed) c.lime.seed = *f.lime_seed;
  if (!f.shap_background.empty()) c.shap_background = f.shap_background;
  if (f.n_background) c.n_background = *f.n_background;
  if (f.background_seed) c.background_seed = *f.background_seed;
  if (f.midpoint) c.midpoint = *f.midpoint;
  if (f.default_n) c.default_n = *f.default_n;
  if (f.grid_size) c.grid_size = *f.grid_size;
  if (c.data_path.empty()) throw UsageError("--data is required (directly or via --config)");
  if (c.schema_path.empty()) throw UsageError("--schema is required (directly or via --config)");
  if (c.graph_path.empty()) throw UsageError("--graph is required (directly or via --config)");
  return c;
}

std::pair<std::string, double> parse_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
    throw UsageError("--set expects attribute=value, got '" + s + "'");
  }
  const std::string value = s.substr(eq + 1);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || !std::isfinite(v)) throw UsageError("--set value is not a finite number: '" + value + "'");
  return {s.substr(0, eq), v};
}

void print(const json& j) { std::cout << whatif::to_json_text(j) << '\n'; }

int run_validate(const Flags& f) {
  bool ok = true;
  auto report = [&](const std::string& check, const std::optional<whatif::Error>& err) {
    if (err) {
      ok = false;
      std::cout << "FAIL " << check << ": " << err->code() << ": " << err->what() << '\n';
    } else {
      std::cout << "PASS " << check << '\n';
    }
  };
  auto attempt = [](auto&& fn) -> std::optional<whatif::Error> {
    try {
      fn();
      return std::nullopt;
    } catch (const whatif::Error& e) {
      return e;
    }
  };

  whatif::ServiceConfig c;
  try {
    c = make_config(f);
  } catch (const whatif::Error& e) {
    report("config", e);
    return 2;
  }
  std::optional<whatif::Schema> schema;
  report("schema", attempt([&] {
           auto in = whatif::open_input(c.schema_path, "schema");
           schema = whatif::parse_schema(in);
           for (const auto& w : schema->validate()) std::cerr << "warning: " << w << '\n';
         }));
  std::optional<whatif::Dataset> dataset;
  if (schema) {
    report("data", attempt([&] {
             auto in = whatif::open_input(c.data_path, "data");
             dataset.emplace(whatif::load_dataset(in, *schema));
           }));
  } else {
    std::cout << "SKIP data\n";
  }
  std::optional<whatif::GraphSpec> spec;
  report("graph", attempt([&] {
           auto in = whatif::open_input(c.graph_path, "graph");
           spec = whatif::parse_graph_spec(in);
           whatif::validate_graph(spec->nodes, spec->edges, spec->outcome);
         }));
  if (schema && spec) {
    report("graph_schema_match", attempt([&] { whatif::bind_graph(*spec, *schema); }));
  } else {
    std::cout << "SKIP graph_schema_match\n";
  }
  if (dataset && spec && schema && ok) {
    report("model_fit", attempt([&] { whatif::fit_scm(whatif::bind_graph(*spec, *schema), dataset->units()); }));
  }
  if (c.geo_path) {
    if (dataset && spec && schema && ok) {
      report("geo", attempt([&] {
               whatif::Service svc(c, *dataset, whatif::bind_graph(*spec, *schema));
               for (const auto& w : svc.warnings()) std::cerr << "warning: " << w << '\n';
             }));
    } else {
      std::cout << "SKIP geo\n";
    }
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized causal what-if analysis over geographic units"};
  app.require_subcommand(1);
  Flags flags;

  auto* serve = app.add_subcommand("serve", "serve the HTTP JSON API");
  add_service_flags(serve, flags);
  serve->add_option("--port", flags.port, "listen port");
  serve->add_option("--host", flags.host, "listen address");

  std::string unit;
  std::int64_t n = 10;
  bool as_json = false;

  auto* intervene = app.add_subcommand("intervene", "simulate do(attribute = value) for one unit");
  add_service_flags(intervene, flags);
  std::string assignment;
  intervene->add_option("--unit", unit, "unit id")->required();
  intervene->add_option("--n", n, "neighbor count");
  intervene->add_option("--set", assignment, "attribute=value")->required();
  intervene->add_flag("--json", as_json, "print the full JSON result");

  auto* explain = app.add_subcommand("explain", "explain the subgroup model's prediction for one unit");
  add_service_flags(explain, flags);
  std::string method = "shap";
  std::optional<std::uint64_t> seed;
  explain->add_option("--unit", unit, "unit id")->required();
  explain->add_option("--n", n, "neighbor count");
  explain->add_option("--method", method, "lime | shap")->check(CLI::IsMember({"lime", "shap"}));
  explain->add_option("--seed", seed, "LIME sampling seed");

  auto* recommend = app.add_subcommand("recommend", "rank single-attribute interventions toward a target outcome");
  add_service_flags(recommend, flags);
  double target = 0.0;
  recommend->add_option("--unit", unit, "unit id")->required();
  recommend->add_option("--n", n, "neighbor count");
  recommend->add_option("--target", target, "desired outcome")->required();

  auto* validate = app.add_subcommand("validate", "run load-time checks without serving");
  add_service_flags(validate, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*validate) return run_validate(flags);

    const auto config = make_config(flags);
    const whatif::Service service(config);
    for (const auto& w : service.warnings()) std::cerr << "warning: " << w << '\n';

    if (*serve) {
      httplib::Server server;
      whatif::install_routes(server, service);
      std::cout << "loaded " << service.dataset().size() << " units, " << service.dataset().treatment_count()
                << " treatments" << std::endl;
      std::cerr << "listening on http://" << config.host << ':' << config.port << std::endl;
      if (!server.listen(config.host, config.port)) {
        std::cerr << "error: cannot listen on " << config.host << ':' << config.port << '\n';
        return 2;
      }
      return 0;
    }
    if (*intervene) {
      const auto [attribute, value] = parse_assignment(assignment);
      const json result = service.post_intervene({{"unit_id", unit}, {"n", n}, {"attribute", attribute}, {"value", value}});
      if (as_json) {
        print(result);
      } else {
        const auto& attrs = result["attributes"];
        for (std::size_t i = 0; i < attrs.size(); ++i) {
          const auto name = attrs[i].get<std::string>();
          const bool changed = std::find(result["changed"].begin(), result["changed"].end(), name) != result["changed"].end();
          std::cout << name << ": " << result["factual"][i].get<double>() << " -> "
                    << result["counterfactual"][i].get<double>() << (changed ? "  *" : "") << '\n';
        }
      }
      return 0;
    }
    if (*explain) {
      json body{{"unit_id", unit}, {"n", n}};
      if (method == "lime") {
        if (seed) body["overrides"] = {{"seed", *seed}};
        print(service.post_explain_lime(body));
      } else {
        print(service.post_explain_shap(body));
      }
      return 0;
    }
    if (*recommend) {
      json body{{"unit_id", unit}, {"n", n}, {"target", target}};
      print(service.post_recommend(body));
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const whatif::Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return 2;
  }
  return 1;
}
