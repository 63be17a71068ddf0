#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "again/again.hpp"

namespace again::test {

inline Matrix<double> gaussian(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n;
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Scalar readout Σ w ⊙ y with a fixed weight matrix, so every output entry
/// contributes its own coefficient to a gradient check.
template <class T>
Var<T> weighted_sum(Tape<T>& tape, Var<T> y, const Matrix<T>& w) {
  if (y.rows() != w.rows() || y.cols() != w.cols()) throw shape_error("weighted_sum: weight shape mismatch");
  Matrix<T> out(1, 1);
  out(0, 0) = y.value().cwiseProduct(w).sum();
  return tape.record("weighted_sum", std::move(out), {y}, [y, w](Tape<T>& t, const Matrix<T>& g) { t.grad(y) += g(0, 0) * w; });
}

/// Planted-partition graph with every node labeled.
inline AttributedGraph small_synthetic(std::uint64_t seed, Index nodes = 300, int classes = 3) {
  SyntheticSpec s;
  s.nodes = nodes;
  s.classes = classes;
  s.feature_dim = 60;
  s.p_in = 0.04;
  s.p_out = 0.004;
  s.seed = seed;
  return make_planted_partition(s);
}

/// Small, fast configuration for end-to-end tests.
inline TrainConfig small_config(Mode mode, std::uint64_t seed = 0) {
  TrainConfig c;
  c.mode = mode;
  c.seed = seed;
  c.labeled_per_class = 10;
  c.max_epochs = 5;
  c.encoder.hidden_dim = 16;
  c.encoder.attention_vector_dim = 8;
  c.sample_sizes = {5, 3};
  c.discriminator_hidden = {16, 8};
  c.batch_size = 32;
  c.log_wall_clock = false;
  return c.resolved();
}

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("again-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

}  // namespace again::test
