#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "again/adversarial.hpp"
#include "again/diffnet/adam.hpp"
#include "again/encoder.hpp"

namespace again {

enum class Mode { gain, again, gs_mean, mlp };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::gain: return "gain";
    case Mode::again: return "again";
    case Mode::gs_mean: return "gs-mean";
    case Mode::mlp: return "mlp";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "gain") return Mode::gain;
  if (s == "again") return Mode::again;
  if (s == "gs-mean" || s == "gs_mean") return Mode::gs_mean;
  if (s == "mlp") return Mode::mlp;
  throw config_error("unknown mode '" + std::string(s) + "' (expected gain, again, gs-mean or mlp)");
}

/// Aggregator each mode runs with.
inline AggregatorKind aggregator_for(Mode m) {
  switch (m) {
    case Mode::gs_mean: return AggregatorKind::mean;
    case Mode::mlp: return AggregatorKind::none_mlp;
    default: return AggregatorKind::attention;
  }
}

struct TrainConfig {
  int labeled_per_class = 20;
  int max_epochs = 200;
  int disc_steps = 1;
  std::vector<int> sample_sizes{25, 10};
  OptimConfig model_optim{0.001, 0.05};  // encoder + classifier
  OptimConfig disc_optim{0.001, 0.0};
  double dropout = 0.5;
  int batch_size = 256;
  PriorConfig prior;
  EncoderConfig encoder;
  Mode mode = Mode::again;
  std::uint64_t seed = 0;
  std::vector<Index> discriminator_hidden = kDiscriminatorHidden;
  // Robustness sweeps: redraw the noisy nodes for every λ instead of fixing them per η.
  bool resample_noise_per_lambda = false;
  // Zero keeps TrainLog free of timing so reruns compare byte for byte.
  bool log_wall_clock = true;
  int validation_every = 0;  // 0 disables the validation hook
  // AGAIN only: train the encoder against the discriminator alone, for
  // checking how far the adversarial term pulls embeddings toward the prior.
  bool adversarial_only = false;

  int depth() const { return encoder.depth; }
  Index embedding_dim() const { return encoder.hidden_dim; }

  /// Aligns the aggregator with the mode and the prior with the embedding size.
  TrainConfig resolved() const {
    TrainConfig c = *this;
    c.encoder.aggregator = aggregator_for(mode);
    c.prior.dim = c.encoder.hidden_dim;
    return c;
  }

  void validate() const {
    if (labeled_per_class < 1) throw config_error("labeled_per_class must be >= 1");
    if (max_epochs < 1) throw config_error("max_epochs must be >= 1");
    if (mode == Mode::again && disc_steps < 1) throw config_error("AGAIN needs at least one discriminator step per epoch");
    if (batch_size < 1) throw config_error("batch_size must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw config_error("dropout must be in [0,1)");
    if (encoder.aggregator != aggregator_for(mode))
      throw config_error("mode " + to_string(mode) + " requires the " + to_string(aggregator_for(mode)) + " aggregator");
    encoder.validate();
    if (mode != Mode::mlp) {
      if (static_cast<int>(sample_sizes.size()) != encoder.depth)
        throw config_error(std::to_string(sample_sizes.size()) + " sample sizes for depth " + std::to_string(encoder.depth));
      for (int s : sample_sizes)
        if (s < 1) throw config_error("sample sizes must be >= 1");
    }
    model_optim.validate();
    disc_optim.validate();
    prior.validate();
    if (prior.dim != encoder.hidden_dim) throw config_error("prior dimension must equal the embedding dimension");
    if (validation_every < 0) throw config_error("validation_every must be >= 0");
    if (adversarial_only && mode != Mode::again) throw config_error("adversarial_only needs mode again");
  }
};

/// Hyperparameters tuned per dataset and labeled-set size; everything else
/// keeps the shared defaults. Unknown names get the shared defaults.
inline TrainConfig dataset_defaults(std::string_view dataset, int labeled_per_class = 20) {
  TrainConfig c;
  c.labeled_per_class = labeled_per_class;
  if (dataset == "blogcatalog") {
    c.disc_steps = 5;
    c.disc_optim.learning_rate = 0.0002;
    c.model_optim.weight_decay = 0.005;
  } else if (dataset == "cora") {
    c.disc_optim.learning_rate = labeled_per_class == 60 ? 0.001 : 0.0001;
  } else if (dataset == "citeseer") {
    c.disc_optim.learning_rate = labeled_per_class == 100 ? 0.0001 : 0.001;
  }
  return c;
}

inline nlohmann::json to_json(const OptimConfig& o) {
  return {{"learning_rate", o.learning_rate}, {"weight_decay", o.weight_decay}, {"beta1", o.beta1},
          {"beta2", o.beta2}, {"epsilon_hat", o.epsilon_hat}};
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {
      {"labeled_per_class", c.labeled_per_class},
      {"max_epochs", c.max_epochs},
      {"disc_steps", c.disc_steps},
      {"sample_sizes", c.sample_sizes},
      {"model_optim", to_json(c.model_optim)},
      {"disc_optim", to_json(c.disc_optim)},
      {"dropout", c.dropout},
      {"batch_size", c.batch_size},
      {"prior", {{"power_exponent", c.prior.power_exponent}, {"dim", c.prior.dim}}},
      {"encoder",
       {{"depth", c.encoder.depth},
        {"hidden_dim", c.encoder.hidden_dim},
        {"attention_vector_dim", c.encoder.attention_vector_dim},
        {"aggregator", to_string(c.encoder.aggregator)},
        {"attention_heads", c.encoder.attention_heads}}},
      {"mode", to_string(c.mode)},
      {"seed", c.seed},
      {"discriminator_hidden", c.discriminator_hidden},
      {"resample_noise_per_lambda", c.resample_noise_per_lambda},
      {"log_wall_clock", c.log_wall_clock},
      {"validation_every", c.validation_every},
      {"adversarial_only", c.adversarial_only},
  };
}

namespace config_detail {

template <class V>
void take(const nlohmann::json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config key '") + key + "': " + e.what());
  }
}

inline void overlay(const nlohmann::json& j, OptimConfig& o) {
  take(j, "learning_rate", o.learning_rate);
  take(j, "weight_decay", o.weight_decay);
  take(j, "beta1", o.beta1);
  take(j, "beta2", o.beta2);
  take(j, "epsilon_hat", o.epsilon_hat);
}

}  // namespace config_detail

/// Overwrites the fields present in `j`; absent keys keep their value.
inline void overlay(const nlohmann::json& j, TrainConfig& c) {
  using config_detail::take;
  if (!j.is_object()) throw config_error("config must be a JSON object");
  static const char* known[] = {"labeled_per_class", "max_epochs", "disc_steps", "sample_sizes", "model_optim",
                                "disc_optim", "dropout", "batch_size", "prior", "encoder", "mode", "seed",
                                "discriminator_hidden", "resample_noise_per_lambda", "log_wall_clock", "validation_every",
                                "adversarial_only"};
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw config_error("unknown config key '" + item.key() + "'");
  }
  take(j, "labeled_per_class", c.labeled_per_class);
  take(j, "max_epochs", c.max_epochs);
  take(j, "disc_steps", c.disc_steps);
  take(j, "sample_sizes", c.sample_sizes);
  if (j.contains("model_optim")) config_detail::overlay(j["model_optim"], c.model_optim);
  if (j.contains("disc_optim")) config_detail::overlay(j["disc_optim"], c.disc_optim);
  take(j, "dropout", c.dropout);
  take(j, "batch_size", c.batch_size);
  if (j.contains("prior")) {
    take(j["prior"], "power_exponent", c.prior.power_exponent);
    take(j["prior"], "dim", c.prior.dim);
  }
  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    take(e, "depth", c.encoder.depth);
    take(e, "hidden_dim", c.encoder.hidden_dim);
    take(e, "attention_vector_dim", c.encoder.attention_vector_dim);
    take(e, "attention_heads", c.encoder.attention_heads);
    if (e.contains("aggregator")) c.encoder.aggregator = parse_aggregator(e["aggregator"].get<std::string>());
  }
  if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
  take(j, "seed", c.seed);
  take(j, "discriminator_hidden", c.discriminator_hidden);
  take(j, "resample_noise_per_lambda", c.resample_noise_per_lambda);
  take(j, "log_wall_clock", c.log_wall_clock);
  take(j, "validation_every", c.validation_every);
  take(j, "adversarial_only", c.adversarial_only);
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  overlay(j, c);
  return c;
}

}  // namespace again
