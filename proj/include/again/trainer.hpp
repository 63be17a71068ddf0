#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "again/model.hpp"

namespace again {

/// The graph as training may see it: test nodes keep their index but lose
/// features, labels and edges.
template <class T>
struct TrainingView {
  BasicGraph<T> graph;
  std::vector<Index> observed;  // V_L ∪ V_U^o, sorted

  Index node_count() const { return static_cast<Index>(observed.size()); }
};

/// Induced subgraph on the observed nodes, under the original indexing.
/// Only observed rows of the feature matrix are read.
template <class T>
TrainingView<T> build_training_view(const BasicGraph<T>& g, const NodeSplit& split) {
  validate_split(split, g);
  TrainingView<T> view;
  view.observed = split.observed();
  const auto n = g.node_count();
  std::vector<char> keep(static_cast<std::size_t>(n), 0);
  for (Index v : view.observed) keep[static_cast<std::size_t>(v)] = 1;
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n));
  Matrix<T> x = Matrix<T>::Zero(n, g.feature_dim());
  std::vector<int> labels(static_cast<std::size_t>(n), kUnlabeled);
  for (Index v : view.observed) {
    for (Index u : g.neighbors(v))
      if (keep[static_cast<std::size_t>(u)]) adj[static_cast<std::size_t>(v)].push_back(u);
    x.row(v) = g.features().row(v);
    labels[static_cast<std::size_t>(v)] = g.label(v);
  }
  view.graph = BasicGraph<T>(g.ids(), std::move(adj), std::move(x), std::move(labels), g.class_count());
  return view;
}

struct EpochRecord {
  int epoch = 0;
  std::optional<double> sup_loss;  // empty in adversarial-only runs
  std::optional<double> dis_loss;
  std::optional<double> gen_loss;
  double seconds = 0.0;
  std::optional<double> val_acc;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::int64_t supervised_updates = 0;
  std::int64_t discriminator_updates = 0;
  std::int64_t generator_updates = 0;

  static constexpr const char* kHeader = "epoch,sup_loss,dis_loss,gen_loss,seconds,val_acc";

  std::string to_csv() const {
    std::ostringstream out;
    out << kHeader << '\n';
    auto opt = [&](const std::optional<double>& v) {
      if (v) out << io_detail::format_number(*v);
    };
    for (const auto& e : epochs) {
      out << e.epoch << ',';
      opt(e.sup_loss);
      out << ',';
      opt(e.dis_loss);
      out << ',';
      opt(e.gen_loss);
      out << ',' << io_detail::format_number(e.seconds) << ',';
      opt(e.val_acc);
      out << '\n';
    }
    return out.str();
  }

  void save_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write " + path);
    f << to_csv();
    if (!f) throw io_error("write failed: " + path);
  }
};

template <class T>
struct TrainResult {
  ParameterSet<T> params;
  TrainLog log;
};

/// Optional per-epoch validation; returns an accuracy for the log.
template <class T>
using ValidationHook = std::function<double(ParameterSet<T>&, int epoch)>;

namespace trainer_detail {

/// `count` distinct nodes from `pool` (all of them when the pool is smaller).
inline std::vector<Index> draw_batch(const std::vector<Index>& pool, std::size_t count, Rng& rng) {
  std::vector<Index> p = pool;
  const std::size_t k = std::min(count, p.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, p.size() - 1);
    std::swap(p[i], p[pick(rng)]);
  }
  p.resize(k);
  return p;
}

template <class F>
auto with_context(int epoch, const char* step, F&& f) {
  try {
    return f();
  } catch (const numeric_error& e) {
    throw numeric_error("epoch " + std::to_string(epoch) + ", " + step + ": " + e.what());
  }
}

}  // namespace trainer_detail

/// Runs epochs first..last in place on `params`, appending to `log`. Random
/// streams are keyed by (seed, first) so a resumed run is reproducible too.
template <class T>
void run_epochs(const TrainingView<T>& view, const NodeSplit& split, const TrainConfig& cfg, ParameterSet<T>& params,
                TrainLog& log, int first, int last, const ValidationHook<T>& validate = {}) {
  const auto& graph = view.graph;
  Adam<T> model_opt(params.model_tensors(), cfg.model_optim);
  Adam<T> disc_opt(params.discriminator.tensors(), cfg.disc_optim);
  const auto encoder_group = params.encoder.tensors();

  const auto sub = static_cast<std::uint64_t>(first - 1);
  auto batch_rng = make_rng(cfg.seed, Stream::batches, sub);
  auto sampling_rng = make_rng(cfg.seed, Stream::sampling, sub);
  auto dropout_rng = make_rng(cfg.seed, Stream::dropout, sub);
  auto prior_rng = make_rng(cfg.seed, Stream::prior, sub);
  auto adv_rng = make_rng(cfg.seed, Stream::adversarial_batches, sub);
  const ForwardMode train_mode{true, cfg.dropout, &dropout_rng};
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = first; epoch <= last; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;

    double sup_sum = 0.0;
    int sup_batches = 0;
    const auto labeled_batches = cfg.adversarial_only ? std::vector<std::vector<Index>>{}
                                                      : iterate_batches(std::span<const Index>(split.labeled), batch_size, batch_rng);
    for (const auto& batch : labeled_batches) {
      sup_sum += trainer_detail::with_context(epoch, "supervised step", [&] {
        model_opt.zero_grad();
        Tape<T> tape;
        auto ev = bind(tape, params.encoder, cfg.encoder);
        auto cv = bind(tape, params.classifier);
        std::vector<int> labels;
        labels.reserve(batch.size());
        for (Index v : batch) labels.push_back(graph.label(v));
        auto loss = ops::cross_entropy(classify(embed_batch(graph, batch, ev, cfg, train_mode, sampling_rng), cv), std::move(labels));
        tape.backward(loss);
        model_opt.step();
        return static_cast<double>(loss.item());
      });
      ++sup_batches;
      ++log.supervised_updates;
    }
    if (sup_batches > 0) rec.sup_loss = sup_sum / sup_batches;

    if (cfg.mode == Mode::again) {
      double dis_sum = 0.0;
      for (int s = 0; s < cfg.disc_steps; ++s) {
        dis_sum += trainer_detail::with_context(epoch, "discriminator step", [&] {
          const auto nodes = trainer_detail::draw_batch(view.observed, batch_size, adv_rng);
          Matrix<T> fake;
          {
            Tape<T> tape;
            auto ev = bind(tape, params.encoder, cfg.encoder, false);
            fake = embed_batch(graph, nodes, ev, cfg, train_mode, sampling_rng).value();
          }
          const Matrix<T> real = sample_prior<T>(cfg.prior, fake.rows(), prior_rng);
          disc_opt.zero_grad();
          Tape<T> tape;
          auto dv = bind(tape, params.discriminator);
          auto loss = discriminator_loss(tape, real, fake, dv);
          tape.backward(loss);
          disc_opt.step();
          return static_cast<double>(loss.item());
        });
        ++log.discriminator_updates;
      }
      rec.dis_loss = dis_sum / cfg.disc_steps;

      rec.gen_loss = trainer_detail::with_context(epoch, "generator step", [&] {
        const auto nodes = trainer_detail::draw_batch(view.observed, batch_size, adv_rng);
        model_opt.zero_grad();
        Tape<T> tape;
        auto ev = bind(tape, params.encoder, cfg.encoder);
        auto dv = bind(tape, params.discriminator, false);
        auto loss = generator_loss(embed_batch(graph, nodes, ev, cfg, train_mode, sampling_rng), dv);
        tape.backward(loss);
        model_opt.step(encoder_group);
        return static_cast<double>(loss.item());
      });
      ++log.generator_updates;
    }

    if (validate && cfg.validation_every > 0 && epoch % cfg.validation_every == 0) rec.val_acc = validate(params, epoch);
    if (cfg.log_wall_clock) rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.epochs.push_back(rec);
  }
}

/// Minibatch training. Each epoch runs supervised steps over the labeled
/// nodes, then (AGAIN only) disc_steps discriminator updates and one encoder
/// update against the discriminator, each on a fresh batch of observed nodes.
template <class T>
TrainResult<T> train(const BasicGraph<T>& g, const NodeSplit& split, const TrainConfig& cfg,
                     const ValidationHook<T>& validate = {}) {
  cfg.validate();
  const auto view = build_training_view(g, split);
  TrainResult<T> out{init_parameters<T>(cfg, g.feature_dim(), g.class_count()), {}};
  run_epochs(view, split, cfg, out.params, out.log, 1, cfg.max_epochs, validate);
  return out;
}

/// Continues training restored parameters for `extra_epochs` more epochs
/// (zero leaves both untouched).
template <class T>
void resume(const BasicGraph<T>& g, const NodeSplit& split, const TrainConfig& cfg, ParameterSet<T>& params, TrainLog& log,
            int extra_epochs, const ValidationHook<T>& validate = {}) {
  cfg.validate();
  if (extra_epochs < 0) throw config_error("extra_epochs must be >= 0");
  if (extra_epochs == 0) return;
  const auto view = build_training_view(g, split);
  const int first = static_cast<int>(log.epochs.size()) + 1;
  run_epochs(view, split, cfg, params, log, first, first + extra_epochs - 1, validate);
}


// Checkpoints: "AGAINCKP", u32 format version, u64 header length, JSON
// header (config, dimensions, tensor table), then for each tensor its value,
// first and second moments as little-endian float32.

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'A', 'G', 'A', 'I', 'N', 'C', 'K', 'P'};

struct Checkpoint {
  TrainConfig config;
  Index feature_dim = 0;
  Index class_count = 0;
  ParameterSet<float> params;
};

namespace checkpoint_detail {

template <class U>
void put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <class U>
U get(std::istream& in, const std::string& path) {
  U v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(U))) throw io_error("truncated checkpoint: " + path);
  return v;
}

inline void put_matrix(std::ostream& out, const Matrix<float>& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

inline void get_matrix(std::istream& in, Matrix<float>& m, const std::string& path) {
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float))))
    throw io_error("truncated checkpoint: " + path);
}

}  // namespace checkpoint_detail

inline void save_checkpoint(const std::string& path, const TrainConfig& cfg, Index feature_dim, Index class_count,
                            ParameterSet<float>& params) {
  using namespace checkpoint_detail;
  nlohmann::json header;
  header["config"] = to_json(cfg);
  header["feature_dim"] = feature_dim;
  header["class_count"] = class_count;
  auto tensors = params.all();
  header["tensors"] = nlohmann::json::array();
  for (auto* p : tensors)
    header["tensors"].push_back(
        {{"name", p->name}, {"role", p->role}, {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"step", p->step}});
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write checkpoint " + path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto* p : tensors) {
    put_matrix(out, p->value);
    put_matrix(out, p->m);
    put_matrix(out, p->v);
  }
  if (!out) throw io_error("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  using namespace checkpoint_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint " + path);
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw io_error("not a checkpoint file: " + path);
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw version_error("checkpoint " + path + " has format version " + std::to_string(version) + ", expected " +
                        std::to_string(kCheckpointVersion));
  const auto len = get<std::uint64_t>(in, path);
  if (len > (std::uint64_t{1} << 30)) throw io_error("corrupt checkpoint header: " + path);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw io_error("truncated checkpoint: " + path);

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(text);
    ck.config = config_from_json(header.at("config"));
    ck.feature_dim = header.at("feature_dim").get<Index>();
    ck.class_count = header.at("class_count").get<Index>();
    ck.params = init_parameters<float>(ck.config, ck.feature_dim, ck.class_count);
    auto tensors = ck.params.all();
    const auto& table = header.at("tensors");
    if (table.size() != tensors.size()) throw io_error("checkpoint tensor table does not match its config: " + path);
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      auto* p = tensors[i];
      const auto& e = table[i];
      if (e.at("name").get<std::string>() != p->name || e.at("rows").get<Index>() != p->value.rows() ||
          e.at("cols").get<Index>() != p->value.cols())
        throw io_error("checkpoint tensor '" + e.at("name").get<std::string>() + "' does not match the model: " + path);
      p->step = e.at("step").get<std::int64_t>();
    }
    for (auto* p : tensors) {
      get_matrix(in, p->value, path);
      get_matrix(in, p->m, path);
      get_matrix(in, p->v, path);
      p->zero_grad();
    }
  } catch (const nlohmann::json::exception& e) {
    throw io_error("corrupt checkpoint header in " + path + ": " + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw io_error("trailing bytes in checkpoint " + path);
  return ck;
}

}  // namespace again
