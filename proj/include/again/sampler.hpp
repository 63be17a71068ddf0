#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "again/graph.hpp"

namespace again {

/// Nodes reached at one search depth, grouped by the parent position at the
/// previous depth: the children of parent i are nodes[offsets[i]..offsets[i+1]).
struct Frontier {
  std::vector<Index> nodes;
  Offsets offsets;

  std::size_t parents() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

/// A batch of targets plus its outward neighborhood tree. Level 0 is the
/// targets; level k (1..K) is depth_frontiers[k-1].
struct SampledBatch {
  std::vector<Index> targets;
  std::vector<Frontier> depth_frontiers;
  std::vector<int> sample_sizes;  // empty for exhaustive batches

  int depth() const { return static_cast<int>(depth_frontiers.size()); }
  const std::vector<Index>& level(int k) const { return k == 0 ? targets : depth_frontiers[static_cast<std::size_t>(k - 1)].nodes; }
};

namespace sampler_detail {

inline Offsets uniform_offsets(std::size_t parents, std::size_t stride) {
  Offsets o(parents + 1);
  for (std::size_t i = 0; i <= parents; ++i) o[i] = i * stride;
  return o;
}

}  // namespace sampler_detail

/// Draws s_k neighbors per frontier node at each depth. Nodes with at least
/// s_k neighbors give s_k distinct ones; smaller neighborhoods are sampled
/// with replacement; isolated nodes repeat themselves.
template <class T>
SampledBatch sample_neighborhood(const BasicGraph<T>& g, std::span<const Index> targets, std::span<const int> sizes, Rng& rng) {
  if (targets.empty()) throw validation_error("empty batch");
  if (sizes.empty()) throw config_error("sample sizes must be non-empty");
  for (int s : sizes)
    if (s < 1) throw config_error("every sample size must be >= 1");
  SampledBatch b;
  b.targets.assign(targets.begin(), targets.end());
  b.sample_sizes.assign(sizes.begin(), sizes.end());
  b.depth_frontiers.reserve(sizes.size());
  std::vector<Index> scratch;
  const std::vector<Index>* parents = &b.targets;
  for (int s : sizes) {
    const auto stride = static_cast<std::size_t>(s);
    Frontier f;
    f.nodes.reserve(parents->size() * stride);
    for (Index v : *parents) {
      auto nb = g.neighbors(v);
      const std::size_t deg = nb.size();
      if (deg == 0) {
        f.nodes.insert(f.nodes.end(), stride, v);
      } else if (deg >= stride) {
        scratch.assign(nb.begin(), nb.end());
        for (std::size_t i = 0; i < stride; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, deg - 1);
          std::swap(scratch[i], scratch[pick(rng)]);
          f.nodes.push_back(scratch[i]);
        }
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, deg - 1);
        for (std::size_t i = 0; i < stride; ++i) f.nodes.push_back(nb[pick(rng)]);
      }
    }
    f.offsets = sampler_detail::uniform_offsets(parents->size(), stride);
    b.depth_frontiers.push_back(std::move(f));
    parents = &b.depth_frontiers.back().nodes;
  }
  return b;
}

template <class T>
SampledBatch sample_neighborhood(const BasicGraph<T>& g, std::span<const Index> targets, std::span<const int> sizes,
                                 std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::sampling);
  return sample_neighborhood(g, targets, sizes, rng);
}

/// Concatenates trees of equal depth, in order, into one batch.
inline SampledBatch merge_batches(const std::vector<SampledBatch>& parts) {
  if (parts.empty()) throw validation_error("empty batch");
  SampledBatch b;
  const int depth = parts.front().depth();
  b.sample_sizes = parts.front().sample_sizes;
  b.depth_frontiers.resize(static_cast<std::size_t>(depth));
  for (auto& f : b.depth_frontiers) f.offsets.push_back(0);
  for (const auto& p : parts) {
    if (p.depth() != depth) throw shape_error("cannot merge batches of different depth");
    b.targets.insert(b.targets.end(), p.targets.begin(), p.targets.end());
    for (int k = 0; k < depth; ++k) {
      auto& dst = b.depth_frontiers[static_cast<std::size_t>(k)];
      const auto& src = p.depth_frontiers[static_cast<std::size_t>(k)];
      const std::size_t shift = dst.nodes.size();
      dst.nodes.insert(dst.nodes.end(), src.nodes.begin(), src.nodes.end());
      for (std::size_t i = 1; i < src.offsets.size(); ++i) dst.offsets.push_back(src.offsets[i] + shift);
    }
  }
  return b;
}

/// Like sample_neighborhood, but every target draws from its own stream
/// keyed by (seed, node). A node's tree then does not depend on which batch
/// it is in or where.
template <class T>
SampledBatch sample_neighborhood_keyed(const BasicGraph<T>& g, std::span<const Index> targets, std::span<const int> sizes,
                                       std::uint64_t seed) {
  if (targets.empty()) throw validation_error("empty batch");
  std::vector<SampledBatch> parts;
  parts.reserve(targets.size());
  for (Index v : targets) {
    auto rng = make_rng(seed, Stream::evaluation, static_cast<std::uint64_t>(v));
    parts.push_back(sample_neighborhood(g, std::span<const Index>(&v, 1), sizes, rng));
  }
  return merge_batches(parts);
}

/// Every neighbor exactly once (isolated nodes: themselves), `depth` levels deep.
template <class T>
SampledBatch exhaustive_neighborhood(const BasicGraph<T>& g, std::span<const Index> targets, int depth) {
  if (depth < 1) throw config_error("depth must be >= 1");
  if (targets.empty()) throw validation_error("empty batch");
  SampledBatch b;
  b.targets.assign(targets.begin(), targets.end());
  b.depth_frontiers.reserve(static_cast<std::size_t>(depth));
  const std::vector<Index>* parents = &b.targets;
  for (int k = 0; k < depth; ++k) {
    Frontier f;
    f.offsets.push_back(0);
    for (Index v : *parents) {
      auto nb = g.neighbors(v);
      if (nb.empty()) f.nodes.push_back(v);
      else f.nodes.insert(f.nodes.end(), nb.begin(), nb.end());
      f.offsets.push_back(f.nodes.size());
    }
    b.depth_frontiers.push_back(std::move(f));
    parents = &b.depth_frontiers.back().nodes;
  }
  return b;
}

/// A seeded permutation of `nodes` cut into chunks of at most batch_size.
inline std::vector<std::vector<Index>> iterate_batches(std::span<const Index> nodes, std::size_t batch_size, Rng& rng,
                                                       bool shuffle = true) {
  if (nodes.empty()) throw validation_error("no nodes to batch");
  if (batch_size == 0) throw config_error("batch size must be positive");
  std::vector<Index> order(nodes.begin(), nodes.end());
  if (shuffle) std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Index>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

inline std::vector<std::vector<Index>> iterate_batches(std::span<const Index> nodes, std::size_t batch_size, std::uint64_t seed,
                                                       bool shuffle = true) {
  auto rng = make_rng(seed, Stream::batches);
  return iterate_batches(nodes, batch_size, rng, shuffle);
}

}  // namespace again
