#pragma once

// Shared generators and independent oracles for the test suites. Nothing in
// here calls into the engine code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "whatif.hpp"

namespace whatif::testing {

inline std::string data_dir() { return WHATIF_DATA_DIR; }

inline std::string fixture_path(const std::string& fixture, const std::string& file) {
  return data_dir() + "/" + fixture + "/" + file;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Schema load_schema(const std::string& fixture) {
  std::ifstream in(fixture_path(fixture, "schema.json"));
  return parse_schema(in);
}

inline Dataset load_fixture(const std::string& fixture) {
  std::ifstream in(fixture_path(fixture, "units.csv"));
  return load_dataset(in, load_schema(fixture));
}

inline CausalGraph load_graph(const std::string& fixture, const Schema& schema) {
  std::ifstream in(fixture_path(fixture, "graph.json"));
  return bind_graph(parse_graph_spec(in), schema);
}

inline ServiceConfig fixture_config(const std::string& fixture) {
  return load_config(fixture_path(fixture, "config.json"));
}

/// Random DAG over X0..X{m-2}, Y with Y a sink, plus a linear-Gaussian model
/// with known coefficients. Units are sampled from the model.
struct RandomScm {
  Schema schema;
  CausalGraph graph;
  FittedSCM model;  // the generating model
  std::vector<Unit> units;
};

inline RandomScm random_scm(std::mt19937_64& rng, std::size_t nodes, std::size_t samples, double noise_sd = -1.0,
                            double edge_prob = 0.4) {
  std::uniform_real_distribution<double> unit01(0.0, 1.0);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::uniform_real_distribution<double> icpt(-5.0, 5.0);
  std::uniform_real_distribution<double> sdd(0.1, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);

  RandomScm r;
  r.schema.id_column = "id";
  r.schema.outcome = "Y";
  for (std::size_t i = 0; i + 1 < nodes; ++i) r.schema.treatments.push_back("X" + std::to_string(i));

  // Random causal rank for every treatment; Y is last.
  std::vector<std::size_t> rank(nodes);
  for (std::size_t i = 0; i < nodes; ++i) rank[i] = i;
  std::shuffle(rank.begin(), rank.end() - 1, rng);
  const auto names = r.schema.attributes();
  std::vector<std::pair<std::string, std::string>> edges;
  for (std::size_t a = 0; a < nodes; ++a) {
    for (std::size_t b = 0; b < nodes; ++b) {
      if (rank[a] < rank[b] && unit01(rng) < edge_prob) edges.emplace_back(names[a], names[b]);
    }
  }
  r.graph = validate_graph(names, edges, std::string("Y"));

  std::vector<Equation> eqs(nodes);
  for (std::size_t v = 0; v < nodes; ++v) {
    eqs[v].intercept = icpt(rng);
    eqs[v].residual_sd = noise_sd > 0 ? noise_sd : sdd(rng);
    for (std::size_t k = 0; k < r.graph.parents(v).size(); ++k) eqs[v].coefficients.push_back(coef(rng));
  }
  r.model = FittedSCM(r.graph, eqs, {});

  for (std::size_t s = 0; s < samples; ++s) {
    Unit u;
    u.id = "u" + std::to_string(s);
    u.name = u.id;
    u.values.assign(nodes, 0.0);
    for (std::size_t v : r.graph.topo_order()) {
      double acc = eqs[v].intercept;
      const auto& ps = r.graph.parents(v);
      for (std::size_t k = 0; k < ps.size(); ++k) acc += eqs[v].coefficients[k] * u.values[ps[k]];
      u.values[v] = acc + eqs[v].residual_sd * z(rng);
    }
    r.units.push_back(std::move(u));
  }
  return r;
}

/// Reachability by breadth-first search over an explicit edge list.
inline std::set<std::string> bfs_descendants(const std::vector<std::pair<std::string, std::string>>& edges,
                                             const std::string& from) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [p, c] : edges) adj[p].push_back(c);
  std::set<std::string> seen;
  std::vector<std::string> frontier{from};
  while (!frontier.empty()) {
    std::vector<std::string> next;
    for (const auto& u : frontier) {
      for (const auto& v : adj[u]) {
        if (seen.insert(v).second) next.push_back(v);
      }
    }
    frontier = std::move(next);
  }
  seen.erase(from);
  return seen;
}

/// Brute-force k-NN: standardized treatment Euclidean distance, ties by id.
inline std::vector<std::string> scan_neighbors(const Dataset& ds, const std::string& center, std::size_t n) {
  const std::size_t d = ds.treatment_count();
  const auto& units = ds.units();
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (const auto& u : units) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += u.values[j];
  }
  for (auto& m : mean) m /= static_cast<double>(units.size());
  for (const auto& u : units) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (u.values[j] - mean[j]) * (u.values[j] - mean[j]);
  }
  for (auto& s : sd) s = std::sqrt(s / static_cast<double>(units.size()));
  auto z = [&](const Unit& u, std::size_t j) { return sd[j] > 0 ? (u.values[j] - mean[j]) / sd[j] : 0.0; };

  const Unit& c = ds.unit(center);
  std::vector<std::pair<double, std::string>> all;
  for (const auto& u : units) {
    if (u.id == center) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (z(u, j) - z(c, j)) * (z(u, j) - z(c, j));
    all.emplace_back(s, u.id);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(n, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

/// Shapley values by direct enumeration, one feature at a time.
template <class Model>
std::vector<double> brute_force_shapley(const Model& f, const std::vector<double>& x, const Matrix& background) {
  const std::size_t d = x.size();
  auto value = [&](std::uint64_t mask) {
    double acc = 0.0;
    for (const auto& b : background) {
      std::vector<double> h(d);
      for (std::size_t j = 0; j < d; ++j) h[j] = (mask >> j) & 1U ? x[j] : b[j];
      acc += f(std::span<const double>(h));
    }
    return acc / static_cast<double>(background.size());
  };
  std::vector<double> phi(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
      if ((mask >> i) & 1U) continue;
      const int s = __builtin_popcountll(mask);
      const double w = std::tgamma(s + 1.0) * std::tgamma(static_cast<double>(d) - s) / std::tgamma(d + 1.0);
      phi[i] += w * (value(mask | (std::uint64_t{1} << i)) - value(mask));
    }
  }
  return phi;
}

}  // namespace whatif::testing
