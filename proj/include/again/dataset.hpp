#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include "again/graph.hpp"

namespace again {

inline constexpr const char* kDataRootEnv = "AGAIN_DATA_ROOT";

/// $AGAIN_DATA_ROOT, or ./data when unset.
inline std::filesystem::path default_data_root() {
  const char* env = std::getenv(kDataRootEnv);
  return env != nullptr && *env != '\0' ? std::filesystem::path(env) : std::filesystem::path("data");
}

/// `<dir>/edges.txt`, `features.txt`, `labels.txt` and optional `split.txt`.
struct DatasetPaths {
  std::filesystem::path dir;

  std::filesystem::path edges() const { return dir / "edges.txt"; }
  std::filesystem::path features() const { return dir / "features.txt"; }
  std::filesystem::path labels() const { return dir / "labels.txt"; }
  std::filesystem::path split() const { return dir / "split.txt"; }
  bool has_split() const { return std::filesystem::exists(split()); }
  bool complete() const {
    return std::filesystem::exists(edges()) && std::filesystem::exists(features()) && std::filesystem::exists(labels());
  }
};

struct Dataset {
  std::string name;
  DatasetPaths paths;
  AttributedGraph graph;
  std::optional<NodeSplit> fixed_split;
};

inline Dataset load_dataset(const std::filesystem::path& dir, std::string name = {}) {
  Dataset d;
  d.paths.dir = dir;
  d.name = name.empty() ? dir.filename().string() : std::move(name);
  d.graph = load_graph(d.paths.edges().string(), d.paths.features().string(), d.paths.labels().string(), std::nullopt);
  if (d.paths.has_split()) d.fixed_split = load_fixed_split(d.paths.split().string(), d.graph);
  return d;
}

/// The dataset's own split when it has n labeled nodes per class, otherwise
/// a seeded random one.
inline NodeSplit choose_split(const Dataset& d, int labeled_per_class, Index test_count, std::uint64_t seed) {
  if (d.fixed_split && static_cast<Index>(d.fixed_split->labeled.size()) ==
                           static_cast<Index>(labeled_per_class) * d.graph.class_count())
    return *d.fixed_split;
  return make_split(d.graph, labeled_per_class, test_count, seed);
}

}  // namespace again
