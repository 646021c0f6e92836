#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "whatif/dataset.hpp"
#include "whatif/error.hpp"

namespace whatif {

struct LshParams {
  std::size_t tables = 16;  // L
  std::size_t bits = 8;     // k hyperplanes per table
  std::uint64_t seed = 42;
  std::size_t probes = 1;  // extra buckets per table, one low-margin bit flipped each
};

/// Random-hyperplane sign hashing over standardized treatment vectors.
/// The outcome never enters the hashed space.
class LshIndex {
 public:
  LshIndex() = default;

  const LshParams& params() const { return params_; }
  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return points_.size() / std::max<std::size_t>(dim_, 1); }
  std::span<const double> point(std::size_t i) const { return {points_.data() + i * dim_, dim_}; }

  std::vector<double> projections(std::size_t table, std::span<const double> z) const {
    std::vector<double> dots(params_.bits, 0.0);
    const double* planes = planes_.data() + table * params_.bits * dim_;
    for (std::size_t b = 0; b < params_.bits; ++b) {
      for (std::size_t j = 0; j < dim_; ++j) dots[b] += planes[b * dim_ + j] * z[j];
    }
    return dots;
  }

  std::uint64_t key(std::size_t table, std::span<const double> z) const { return key_of(projections(table, z)); }

  /// Bucket members, in dataset order; empty when the bucket does not exist.
  std::span<const std::size_t> bucket(std::size_t table, std::uint64_t key) const {
    auto it = tables_[table].find(key);
    if (it == tables_[table].end()) return {};
    return it->second;
  }

  /// Union of the query's buckets across all tables, ascending dataset index.
  /// Each table also contributes the buckets reached by flipping the
  /// `probes` bits whose projections sit closest to their hyperplane.
  std::vector<std::size_t> candidates(std::span<const double> z) const {
    std::vector<std::size_t> out;
    std::vector<std::size_t> order(params_.bits);
    for (std::size_t t = 0; t < params_.tables; ++t) {
      const auto dots = projections(t, z);
      const std::uint64_t home = key_of(dots);
      auto b = bucket(t, home);
      out.insert(out.end(), b.begin(), b.end());
      const std::size_t flips = std::min(params_.probes, params_.bits);
      if (flips == 0) continue;
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(flips), order.end(),
                        [&](std::size_t a, std::size_t c) {
                          if (std::abs(dots[a]) != std::abs(dots[c])) return std::abs(dots[a]) < std::abs(dots[c]);
                          return a < c;
                        });
      for (std::size_t f = 0; f < flips; ++f) {
        auto nb = bucket(t, home ^ (std::uint64_t{1} << order[f]));
        out.insert(out.end(), nb.begin(), nb.end());
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  friend LshIndex build_index(const Dataset&, const LshParams&);

  static std::uint64_t key_of(const std::vector<double>& dots) {
    std::uint64_t k = 0;
    for (std::size_t b = 0; b < dots.size(); ++b) {
      if (dots[b] >= 0.0) k |= std::uint64_t{1} << b;
    }
    return k;
  }

  LshParams params_;
  std::size_t dim_ = 0;
  std::vector<double> planes_;  // tables x bits x dim
  std::vector<double> points_;  // size x dim, standardized
  std::vector<std::unordered_map<std::uint64_t, std::vector<std::size_t>>> tables_;
};

inline LshIndex build_index(const Dataset& ds, const LshParams& params = {}) {
  if (ds.size() == 0) throw Error(errc::kEmptyDataset, "dataset has no rows");
  if (params.tables == 0 || params.bits == 0 || params.bits > 64) {
    throw Error(errc::kInvalidArgument, "LSH needs tables >= 1 and 1 <= bits <= 64");
  }
  LshIndex idx;
  idx.params_ = params;
  idx.dim_ = ds.treatment_count();

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  idx.planes_.resize(params.tables * params.bits * idx.dim_);
  for (auto& p : idx.planes_) p = normal(rng);

  idx.points_.reserve(ds.size() * idx.dim_);
  for (const auto& u : ds.units()) {
    auto z = standardize(std::span<const double>(u.values).first(idx.dim_), ds.stats());
    idx.points_.insert(idx.points_.end(), z.begin(), z.end());
  }
  idx.tables_.resize(params.tables);
  for (std::size_t t = 0; t < params.tables; ++t) {
    for (std::size_t i = 0; i < ds.size(); ++i) idx.tables_[t][idx.key(t, idx.point(i))].push_back(i);
  }
  return idx;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;  // Euclidean, standardized treatment space
};

struct Subgroup {
  std::string center_id;
  std::vector<std::string> neighbor_ids;  // nearest first
  std::vector<double> distances;
  std::size_t n = 0;
  std::vector<std::pair<double, double>> ranges;  // per attribute, raw units, center included
};

/// Coordinate-wise (min, max) over all members.
inline std::vector<std::pair<double, double>> subgroup_ranges(std::span<const Unit* const> members) {
  if (members.empty()) throw Error(errc::kEmptyMemberList, "subgroup has no members");
  const std::size_t width = members.front()->values.size();
  std::vector<std::pair<double, double>> r(width);
  for (std::size_t j = 0; j < width; ++j) r[j] = {members.front()->values[j], members.front()->values[j]};
  for (const Unit* m : members) {
    if (m->values.size() != width) throw Error(errc::kShapeMismatch, "subgroup members differ in width");
    for (std::size_t j = 0; j < width; ++j) {
      r[j].first = std::min(r[j].first, m->values[j]);
      r[j].second = std::max(r[j].second, m->values[j]);
    }
  }
  return r;
}

inline std::vector<std::pair<double, double>> subgroup_ranges(std::span<const Unit> members) {
  std::vector<const Unit*> ptrs;
  for (const auto& m : members) ptrs.push_back(&m);
  return subgroup_ranges(ptrs);
}

namespace detail {

// Strict order on (distance, id); `ids` breaks ties.
struct NeighborOrder {
  const Dataset* ds;
  bool operator()(const Neighbor& a, const Neighbor& b) const {
    if (a.distance != b.distance) return a.distance < b.distance;
    return ds->units()[a.index].id < ds->units()[b.index].id;
  }
};

}  // namespace detail

/// Exact k nearest neighbors of `center` (excluded from the result).
///
/// LSH candidates are re-ranked exactly and the n-th best candidate distance
/// becomes a pruning radius for a verification pass over every point, which
/// makes the answer identical to a brute-force scan under the same
/// (distance, id) order. With fewer than n candidates the radius is
/// unbounded and the pass is a plain full scan.
inline std::vector<Neighbor> exact_neighbors(const LshIndex& index, const Dataset& ds, std::size_t center,
                                             std::size_t n) {
  const std::size_t population = ds.size();
  const std::size_t want = std::min(n, population - 1);
  if (want == 0) return {};
  const auto q = index.point(center);
  detail::NeighborOrder order{&ds};

  std::vector<Neighbor> best;
  for (std::size_t i : index.candidates(q)) {
    if (i != center) best.push_back({i, squared_distance(q, index.point(i))});
  }
  std::sort(best.begin(), best.end(), order);
  if (best.size() > want) best.resize(want);
  double radius = best.size() == want ? best.back().distance : std::numeric_limits<double>::infinity();

  std::vector<bool> seen(population, false);
  for (const auto& b : best) seen[b.index] = true;
  const std::size_t dim = index.dimension();
  for (std::size_t i = 0; i < population; ++i) {
    if (i == center || seen[i]) continue;
    const auto p = index.point(i);
    double s = 0.0;
    std::size_t j = 0;
    for (; j < dim && s <= radius; ++j) {
      const double d = q[j] - p[j];
      s += d * d;
    }
    if (j < dim) continue;  // pruned: partial sum already exceeds the radius
    Neighbor cand{i, s};
    if (best.size() < want || order(cand, best.back())) {
      auto pos = std::upper_bound(best.begin(), best.end(), cand, order);
      best.insert(pos, cand);
      if (best.size() > want) best.pop_back();
      if (best.size() == want) radius = best.back().distance;
    }
  }
  for (auto& b : best) b.distance = std::sqrt(b.distance);
  return best;
}

inline Subgroup nearest_neighbors(const LshIndex& index, const Dataset& ds, std::string_view unit_id, std::size_t n) {
  const auto center = ds.find(unit_id);
  if (!center) throw Error(errc::kUnknownUnit, "unknown unit '" + std::string(unit_id) + "'");
  Subgroup sg;
  sg.center_id = std::string(unit_id);
  sg.n = n;
  std::vector<const Unit*> members{&ds.units()[*center]};
  for (const auto& nb : exact_neighbors(index, ds, *center, n)) {
    sg.neighbor_ids.push_back(ds.units()[nb.index].id);
    sg.distances.push_back(nb.distance);
    members.push_back(&ds.units()[nb.index]);
  }
  sg.ranges = subgroup_ranges(members);
  return sg;
}

/// Center followed by neighbors, as unit copies for model fitting.
inline std::vector<Unit> subgroup_members(const Dataset& ds, const Subgroup& sg) {
  std::vector<Unit> out;
  out.reserve(sg.neighbor_ids.size() + 1);
  out.push_back(ds.unit(sg.center_id));
  for (const auto& id : sg.neighbor_ids) out.push_back(ds.unit(id));
  return out;
}

}  // namespace whatif
