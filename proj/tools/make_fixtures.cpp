// Writes the bundled synthetic fixtures: <out>/<name>/{units.csv, schema.json,
// graph.json, geo.json, config.json}.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "whatif/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text << '\n';
}

void emit(const fs::path& root, const whatif::synthetic::Fixture& f) {
  const fs::path dir = root / f.name;
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "units.csv", std::ios::binary);
    whatif::synthetic::write_csv(csv, f);
  }
  write_text(dir / "schema.json", whatif::schema_to_json(f.schema).dump(2));
  write_text(dir / "graph.json", whatif::synthetic::graph_json(f).dump(2));
  write_text(dir / "geo.json", whatif::synthetic::geojson(f).dump());
  whatif::json config{{"data_path", "units.csv"}, {"schema_path", "schema.json"}, {"graph_path", "graph.json"},
                      {"geo_path", "geo.json"}, {"port", 8080}};
  if (f.midpoint) config["midpoint"] = *f.midpoint;
  write_text(dir / "config.json", config.dump(2));
  std::cout << dir.string() << ": " << f.units.size() << " units\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the bundled synthetic fixtures"};
  std::string out = "data";
  app.add_option("--out", out, "output directory");
  CLI11_PARSE(app, argc, argv);

  namespace syn = whatif::synthetic;
  for (const auto& f : {syn::opioid(), syn::election(), syn::chain(), syn::line(), syn::tiny()}) emit(out, f);
  return 0;
}
