// Command-line front end: train, eval, perturb, embed, gradcheck, sweep, synth.

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "again/again.hpp"
#include "again/dataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kUsage = 2 };

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw again::io_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Hash git would give the file as a blob.
std::string git_blob_sha1(const fs::path& p) {
  const std::string body = read_file(p);
  const std::string head = "blob " + std::to_string(body.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 || EVP_DigestUpdate(ctx, head.data(), head.size()) != 1 ||
      EVP_DigestUpdate(ctx, body.data(), body.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw again::error("sha1 failed for " + p.string());
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

/// Everything needed to rerun a command: argv, resolved config, hashed
/// inputs and the list of files written.
class Manifest {
 public:
  Manifest(std::string command, int argc, char** argv) {
    j_["command"] = std::move(command);
    j_["argv"] = std::vector<std::string>(argv, argv + argc);
    j_["started"] = utc_now();
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
  }
  void input(const fs::path& p) { j_["inputs"].push_back({{"path", p.string()}, {"sha1", git_blob_sha1(p)}}); }
  void output(const fs::path& p) { j_["outputs"].push_back(p.string()); }
  json& operator[](const char* key) { return j_[key]; }

  void write(const fs::path& p) {
    output(p);
    j_["finished"] = utc_now();
    again::write_text(p.string(), j_.dump(2) + "\n");
  }

 private:
  json j_;
};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Dataset selection shared by every data-reading subcommand.
struct DataFlags {
  std::string dataset;
  std::string data_dir;
  std::string data_root;
  std::string split_file;
  again::Index test_count = 1000;

  void add_to(CLI::App* app) {
    app->add_option("--dataset", dataset, "Dataset name, read from <data-root>/<name>");
    app->add_option("--data-dir", data_dir, "Dataset directory (overrides --dataset lookup)");
    app->add_option("--data-root", data_root, std::string("Root for --dataset (default: $") + again::kDataRootEnv + " or ./data)");
    app->add_option("--split-file", split_file, "Split file with #labeled/#observed/#test sections");
    app->add_option("--test-count", test_count, "Test nodes in a random split")->capture_default_str();
  }

  fs::path dir() const {
    if (!data_dir.empty()) return data_dir;
    if (dataset.empty()) throw usage_error("one of --dataset or --data-dir is required");
    return (data_root.empty() ? again::default_data_root() : fs::path(data_root)) / dataset;
  }
  std::string name() const { return lower(dataset.empty() ? fs::path(data_dir).filename().string() : dataset); }

  again::Dataset load(Manifest& m) const {
    auto d = again::load_dataset(dir(), name());
    m["dataset"] = {{"name", d.name}, {"dir", d.paths.dir.string()}};
    m.input(d.paths.edges());
    m.input(d.paths.features());
    m.input(d.paths.labels());
    if (d.paths.has_split()) m.input(d.paths.split());
    return d;
  }

  /// --split-file, then a split saved next to `run_dir`, then the dataset's
  /// own or a seeded random split.
  again::NodeSplit split(const again::Dataset& d, int n, std::uint64_t seed, const fs::path& run_dir, Manifest& m) const {
    fs::path p = split_file;
    if (p.empty() && !run_dir.empty() && fs::exists(run_dir / "split.txt")) p = run_dir / "split.txt";
    if (!p.empty()) {
      m.input(p);
      return again::load_fixed_split(p.string(), d.graph);
    }
    return again::choose_split(d, n, test_count, seed);
  }
};

// Hyperparameter overrides. Unset flags leave the dataset defaults alone.
struct ConfigFlags {
  std::string config_file;
  std::optional<std::string> mode;
  std::optional<int> n, epochs, disc_steps, batch_size, depth, dim, attention_dim, prior_power, validate_every;
  std::optional<std::vector<int>> sample_sizes;
  std::optional<double> lr, lr_disc, wd, wd_disc, dropout;
  std::optional<std::uint64_t> seed;
  bool no_wall_clock = false;

  void add_to(CLI::App* app) {
    const again::TrainConfig d;
    auto str = [](auto v) { return std::to_string(v); };
    app->add_option("--config", config_file, "JSON config file (applied after dataset defaults, before flags)");
    app->add_option("--mode", mode, "Model variant")
        ->check(CLI::IsMember({"again", "gain", "gs-mean", "mlp"}))
        ->default_str(again::to_string(d.mode));
    app->add_option("--n", n, "Labeled nodes per class")->default_str(str(d.labeled_per_class));
    app->add_option("--epochs", epochs, "Training epochs (n_max)")->default_str(str(d.max_epochs));
    app->add_option("--disc-steps", disc_steps, "Discriminator steps per epoch (n_D; 5 on blogcatalog)")->default_str(str(d.disc_steps));
    app->add_option("--sample-sizes", sample_sizes, "Neighbors sampled per depth")->default_str("25 10")->expected(1, 8);
    app->add_option("--lr", lr, "Learning rate for encoder and classifier")->default_str("0.001");
    app->add_option("--lr-disc", lr_disc, "Discriminator learning rate (default depends on dataset and n)")->default_str("0.001");
    app->add_option("--wd", wd, "Weight decay for encoder and classifier (0.005 on blogcatalog)")->default_str("0.05");
    app->add_option("--wd-disc", wd_disc, "Discriminator weight decay")->default_str("0");
    app->add_option("--dropout", dropout, "Dropout rate")->default_str("0.5");
    app->add_option("--batch-size", batch_size, "Batch size")->default_str(str(d.batch_size));
    app->add_option("--depth", depth, "Search depth K")->default_str(str(d.encoder.depth));
    app->add_option("--dim", dim, "Embedding dimension d")->default_str(str(d.encoder.hidden_dim));
    app->add_option("--attention-dim", attention_dim, "Length of the attention vector")->default_str(str(d.encoder.attention_vector_dim));
    app->add_option("--prior-power", prior_power, "Prior variance exponent p in N(0, 10^p I)")->default_str(str(d.prior.power_exponent));
    app->add_option("--seed", seed, "Random seed")->default_str("0");
    app->add_option("--validate-every", validate_every, "Log test accuracy every k epochs (0 = off)")->default_str("0");
    app->add_flag("--no-wall-clock", no_wall_clock, "Write 0 for epoch times so logs compare byte for byte");
  }

  again::TrainConfig resolve(const std::string& dataset) const {
    auto c = again::dataset_defaults(dataset, n.value_or(20));
    if (!config_file.empty()) {
      json j;
      try {
        j = json::parse(read_file(config_file));
      } catch (const json::parse_error& e) {
        throw usage_error("config file " + config_file + ": " + e.what());
      }
      again::overlay(j, c);
    }
    if (mode) c.mode = again::parse_mode(*mode);
    if (n) c.labeled_per_class = *n;
    if (epochs) c.max_epochs = *epochs;
    if (disc_steps) c.disc_steps = *disc_steps;
    if (sample_sizes) c.sample_sizes = *sample_sizes;
    if (lr) c.model_optim.learning_rate = *lr;
    if (lr_disc) c.disc_optim.learning_rate = *lr_disc;
    if (wd) c.model_optim.weight_decay = *wd;
    if (wd_disc) c.disc_optim.weight_decay = *wd_disc;
    if (dropout) c.dropout = *dropout;
    if (batch_size) c.batch_size = *batch_size;
    if (depth) c.encoder.depth = *depth;
    if (dim) c.encoder.hidden_dim = *dim;
    if (attention_dim) c.encoder.attention_vector_dim = *attention_dim;
    if (prior_power) c.prior.power_exponent = *prior_power;
    if (seed) c.seed = *seed;
    if (validate_every) c.validation_every = *validate_every;
    if (no_wall_clock) c.log_wall_clock = false;
    c = c.resolved();
    c.validate();
    return c;
  }
};

again::Checkpoint load_checked(const fs::path& path, const again::Dataset& d, Manifest& m) {
  m.input(path);
  auto ck = again::load_checkpoint(path.string());
  if (ck.feature_dim != d.graph.feature_dim() || ck.class_count != d.graph.class_count())
    throw again::data_error("checkpoint " + path.string() + " expects D=" + std::to_string(ck.feature_dim) + ", C=" +
                            std::to_string(ck.class_count) + " but dataset has D=" + std::to_string(d.graph.feature_dim()) +
                            ", C=" + std::to_string(d.graph.class_count()));
  return ck;
}

std::vector<std::uint64_t> seed_list(std::uint64_t first, int runs) {
  if (runs < 1) throw usage_error("--runs must be >= 1");
  std::vector<std::uint64_t> s;
  for (int i = 0; i < runs; ++i) s.push_back(first + static_cast<std::uint64_t>(i));
  return s;
}

std::string pct(const again::MeanStd& s) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << 100.0 * s.mean << " +/- " << 100.0 * s.std;
  return out.str();
}

// train

struct TrainCmd {
  DataFlags data;
  ConfigFlags config;
  std::string out_dir;
  int eval_runs = 1;

  void add_to(CLI::App* app) {
    data.add_to(app);
    config.add_to(app);
    app->add_option("--out", out_dir, "Output directory (default: runs/<dataset>-<mode>-s<seed>)");
    app->add_option("--eval-runs", eval_runs, "Test-time sampling seeds averaged after training (0 = skip)")->capture_default_str();
  }

  int run(int argc, char** argv) {
    Manifest m("train", argc, argv);
    const auto cfg = config.resolve(data.name());
    const auto d = data.load(m);
    const auto split = data.split(d, cfg.labeled_per_class, cfg.seed, {}, m);
    const fs::path out = out_dir.empty() ? fs::path("runs") / (d.name + "-" + again::to_string(cfg.mode) + "-s" + std::to_string(cfg.seed))
                                         : fs::path(out_dir);
    fs::create_directories(out);
    m["config"] = again::to_json(cfg);
    m["seed"] = cfg.seed;

    again::ValidationHook<float> hook;
    if (cfg.validation_every > 0)
      hook = [&](again::ParameterSet<float>& p, int) { return again::evaluate_accuracy(d.graph, split, p, cfg, cfg.seed); };
    auto result = again::train(d.graph, split, cfg, hook);

    again::save_checkpoint((out / "checkpoint.bin").string(), cfg, d.graph.feature_dim(), d.graph.class_count(), result.params);
    m.output(out / "checkpoint.bin");
    result.log.save_csv((out / "train_log.csv").string());
    m.output(out / "train_log.csv");
    again::save_split(split, d.graph, (out / "split.txt").string());
    m.output(out / "split.txt");
    m["updates"] = {{"supervised", result.log.supervised_updates},
                    {"discriminator", result.log.discriminator_updates},
                    {"generator", result.log.generator_updates}};
    std::cout << "trained " << again::to_string(cfg.mode) << " on " << d.name << " for " << cfg.max_epochs
              << " epochs; final supervised loss " << result.log.epochs.back().sup_loss.value_or(0.0) << "\n";
    if (eval_runs > 0) {
      std::vector<double> acc;
      for (auto s : seed_list(cfg.seed, eval_runs)) acc.push_back(again::evaluate_accuracy(d.graph, split, result.params, cfg, s));
      const auto s = again::mean_std(acc);
      m["test_accuracy"] = {{"mean", s.mean}, {"std", s.std}, {"runs", acc}};
      std::cout << "test accuracy " << pct(s) << " over " << eval_runs << " sampling seed(s)\n";
    }
    m.write(out / "manifest.json");
    std::cout << "wrote " << out.string() << "\n";
    return kOk;
  }
};

// eval

struct EvalCmd {
  DataFlags data;
  std::vector<std::string> checkpoints;
  std::uint64_t seed = 0;
  int runs = 1;
  std::string out;

  void add_to(CLI::App* app) {
    data.add_to(app);
    app->add_option("--checkpoint", checkpoints, "Checkpoint(s); accuracies are pooled across them")->required();
    app->add_option("--seed", seed, "First test-time sampling seed")->capture_default_str();
    app->add_option("--runs", runs, "Sampling seeds per checkpoint")->capture_default_str();
    app->add_option("--out", out, "JSON report path");
  }

  int run(int argc, char** argv) {
    Manifest m("eval", argc, argv);
    const auto d = data.load(m);
    std::vector<double> acc;
    for (const auto& path : checkpoints) {
      auto ck = load_checked(path, d, m);
      const auto split = data.split(d, ck.config.labeled_per_class, ck.config.seed, fs::path(path).parent_path(), m);
      for (auto s : seed_list(seed, runs)) acc.push_back(again::evaluate_accuracy(d.graph, split, ck.params, ck.config, s));
    }
    const auto s = again::mean_std(acc);
    std::cout << "test accuracy " << pct(s) << " over " << acc.size() << " evaluation(s)\n";
    if (!out.empty()) {
      m["accuracy"] = {{"mean", s.mean}, {"std", s.std}, {"runs", acc}};
      m.write(out);
    }
    return kOk;
  }
};

// perturb

struct PerturbCmd {
  DataFlags data;
  std::vector<std::string> checkpoints;
  std::vector<double> lambdas{0.0, 0.5, 1.0, 1.5};
  std::vector<double> etas{0.1};
  std::uint64_t seed = 0;
  int runs = 1;
  bool test_only = false;
  std::optional<bool> resample;
  std::string out = "robustness";
  std::string reference;

  void add_to(CLI::App* app) {
    data.add_to(app);
    app->add_option("--checkpoint", checkpoints, "Checkpoints of one mode, one per training seed; cells pool over them")->required();
    app->add_option("--lambdas", lambdas, "Noise ratios")->capture_default_str();
    app->add_option("--etas", etas, "Fractions of noisy nodes")->capture_default_str();
    app->add_option("--seed", seed, "First noise/sampling seed")->capture_default_str();
    app->add_option("--runs", runs, "Noise seeds per checkpoint")->capture_default_str();
    app->add_flag("--test-only", test_only, "Draw noisy nodes from the test nodes only");
    app->add_flag("--resample-noise,!--fixed-noise", resample, "Redraw noisy nodes for every lambda (default: the config's setting)");
    app->add_option("--out", out, "Output prefix for <out>.csv, <out>_std.csv, <out>.json")->capture_default_str();
    app->add_option("--reference", reference, "GAIN report JSON; also writes <out>_gap.csv");
  }

  static again::RobustnessReport from_json(const json& j) {
    again::RobustnessReport r;
    r.mode = j.at("mode").get<std::string>();
    r.lambdas = j.at("lambdas").get<std::vector<double>>();
    r.etas = j.at("etas").get<std::vector<double>>();
    for (const auto& c : j.at("cells")) {
      again::RobustnessCell cell;
      cell.noise_ratio = c.at("lambda").get<double>();
      cell.node_fraction = c.at("eta").get<double>();
      cell.seeds = c.at("seeds").get<std::vector<std::uint64_t>>();
      cell.accuracies = c.at("accuracies").get<std::vector<double>>();
      r.cells.push_back(std::move(cell));
    }
    return r;
  }

  int run(int argc, char** argv) {
    Manifest m("perturb", argc, argv);
    const auto d = data.load(m);
    std::vector<again::RobustnessReport> reports;
    std::string mode;
    for (const auto& path : checkpoints) {
      auto ck = load_checked(path, d, m);
      if (!mode.empty() && again::to_string(ck.config.mode) != mode) throw usage_error("--checkpoint files mix modes; run one mode at a time");
      mode = again::to_string(ck.config.mode);
      const auto split = data.split(d, ck.config.labeled_per_class, ck.config.seed, fs::path(path).parent_path(), m);
      again::SweepOptions opt{lambdas, etas, seed_list(seed, runs), test_only, resample.value_or(ck.config.resample_noise_per_lambda)};
      reports.push_back(again::robustness_sweep(d.graph, split, ck.params, ck.config, opt));
    }
    const auto report = again::pool_reports(reports);
    again::write_text(out + ".csv", report.to_csv());
    again::write_text(out + "_std.csv", report.to_csv(true));
    again::write_text(out + ".json", report.to_json().dump(2) + "\n");
    for (const char* suffix : {".csv", "_std.csv", ".json"}) m.output(out + suffix);
    std::cout << report.to_csv();
    if (!reference.empty()) {
      m.input(reference);
      const auto gap = again::performance_gap(report, from_json(json::parse(read_file(reference))));
      again::write_text(out + "_gap.csv", gap.to_csv());
      m.output(out + "_gap.csv");
      std::cout << "gap vs reference:\n" << gap.to_csv();
    }
    m.write(out + "_manifest.json");
    return kOk;
  }
};

// embed

struct EmbedCmd {
  DataFlags data;
  std::string checkpoint;
  std::string nodes = "test";
  std::uint64_t seed = 0;
  std::string out = "embeddings.txt";
  bool silhouette = false;

  void add_to(CLI::App* app) {
    data.add_to(app);
    app->add_option("--checkpoint", checkpoint, "Checkpoint")->required();
    app->add_option("--nodes", nodes, "Which nodes to embed")->check(CLI::IsMember({"all", "test", "observed"}))->capture_default_str();
    app->add_option("--seed", seed, "Sampling seed")->capture_default_str();
    app->add_option("--out", out, "Output file, one '<id> <u_1> ... <u_d>' row per node")->capture_default_str();
    app->add_flag("--silhouette", silhouette, "Print silhouette scores of the labeled embedded nodes");
  }

  int run(int argc, char** argv) {
    Manifest m("embed", argc, argv);
    const auto d = data.load(m);
    auto ck = load_checked(checkpoint, d, m);
    const auto split = data.split(d, ck.config.labeled_per_class, ck.config.seed, fs::path(checkpoint).parent_path(), m);
    std::vector<again::Index> which;
    if (nodes == "test") {
      which = split.unseen_test;
    } else if (nodes == "observed") {
      which = split.observed();
    } else {
      for (again::Index v = 0; v < d.graph.node_count(); ++v) which.push_back(v);
    }
    const auto emb = again::embed(d.graph, which, ck.params, ck.config, seed);
    std::ostringstream text;
    for (std::size_t i = 0; i < which.size(); ++i) {
      text << d.graph.id(which[i]);
      for (again::Index j = 0; j < emb.embeddings.cols(); ++j)
        text << ' ' << again::io_detail::format_number(emb.embeddings(static_cast<again::Index>(i), j));
      text << '\n';
    }
    again::write_text(out, text.str());
    m.output(out);
    std::cout << "wrote " << which.size() << " embeddings to " << out << "\n";
    if (silhouette) {
      std::vector<again::Index> rows;
      std::vector<int> labels;
      for (std::size_t i = 0; i < which.size(); ++i)
        if (d.graph.has_label(which[i])) {
          rows.push_back(static_cast<again::Index>(i));
          labels.push_back(d.graph.label(which[i]));
        }
      const auto pts = again::take_rows(emb.embeddings, rows);
      const double raw = again::silhouette(pts, labels);
      const Eigen::MatrixXd proj = again::pca2(pts);
      const double flat = again::silhouette(again::Matrix<double>(proj), labels);
      m["silhouette"] = {{"raw", raw}, {"pca2", flat}};
      std::cout << "silhouette raw " << raw << ", top-2 principal components " << flat << "\n";
    }
    m.write(out + ".manifest.json");
    return kOk;
  }
};

// gradcheck

struct GradCheckCmd {
  double tolerance = 1e-3;
  std::uint64_t seed = 3;

  void add_to(CLI::App* app) {
    app->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();
    app->add_option("--seed", seed, "Parameter initialization seed")->capture_default_str();
  }

  int run() {
    bool ok = true;
    for (const auto& r : again::gradcheck_suite(seed)) {
      const bool pass = r.report.passed(tolerance);
      ok = ok && pass;
      std::printf("%-24s max rel. error %.3e (worst: %s) %s\n", r.name.c_str(), r.report.max_rel_error, r.report.worst.c_str(),
                  pass ? "ok" : "FAIL");
    }
    return ok ? kOk : kRuntime;
  }
};

// sweep

struct SweepCmd {
  DataFlags data;
  ConfigFlags config;
  std::string param;
  std::vector<int> values;
  int runs = 1;
  int jobs = 1;
  std::string out = "sweep.csv";

  void add_to(CLI::App* app) {
    data.add_to(app);
    config.add_to(app);
    app->add_option("--param", param, "Hyperparameter to vary; the rest stay at their defaults")
        ->required()
        ->check(CLI::IsMember({"dim", "sample-size", "attention-dim", "prior-power"}));
    app->add_option("--values", values, "Values to try (sample-size sets every depth to the value)")->required();
    app->add_option("--runs", runs, "Training seeds per value")->capture_default_str();
    app->add_option("--jobs", jobs, "Concurrent training runs")->capture_default_str();
    app->add_option("--out", out, "CSV of value,mean,std")->capture_default_str();
  }

  int run(int argc, char** argv) {
    Manifest m("sweep", argc, argv);
    const auto base = config.resolve(data.name());
    const auto d = data.load(m);
    if (jobs < 1) throw usage_error("--jobs must be >= 1");
    std::vector<again::TrainConfig> cfgs;
    for (int v : values) {
      auto c = base;
      if (param == "dim") c.encoder.hidden_dim = v;
      else if (param == "sample-size") c.sample_sizes.assign(static_cast<std::size_t>(c.encoder.depth), v);
      else if (param == "attention-dim") c.encoder.attention_vector_dim = v;
      else c.prior.power_exponent = v;
      c = c.resolved();
      c.validate();
      cfgs.push_back(c);
    }
    const auto seeds = seed_list(base.seed, runs);
    struct Job {
      std::size_t value;
      std::uint64_t seed;
    };
    std::vector<Job> all;
    for (std::size_t i = 0; i < cfgs.size(); ++i)
      for (auto s : seeds) all.push_back({i, s});
    std::vector<again::NodeSplit> splits;
    for (auto s : seeds) splits.push_back(data.split(d, base.labeled_per_class, s, {}, m));
    std::vector<double> acc(all.size());
    auto work = [&](std::size_t k) {
      auto c = cfgs[all[k].value];
      c.seed = all[k].seed;
      const auto& split = splits[static_cast<std::size_t>(c.seed - base.seed)];
      auto r = again::train(d.graph, split, c);
      acc[k] = again::evaluate_accuracy(d.graph, split, r.params, c, c.seed);
    };
    for (std::size_t k = 0; k < all.size(); k += static_cast<std::size_t>(jobs)) {
      std::vector<std::future<void>> batch;
      for (std::size_t j = k; j < std::min(all.size(), k + static_cast<std::size_t>(jobs)); ++j)
        batch.push_back(std::async(std::launch::async, work, j));
      for (auto& f : batch) f.get();
    }
    std::ostringstream csv;
    csv << "value,mean,std\n";
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
      std::vector<double> a;
      for (std::size_t k = 0; k < all.size(); ++k)
        if (all[k].value == i) a.push_back(acc[k]);
      const auto s = again::mean_std(a);
      csv << values[i] << ',' << again::io_detail::format_number(s.mean) << ',' << again::io_detail::format_number(s.std) << '\n';
    }
    again::write_text(out, csv.str());
    m.output(out);
    m["config"] = again::to_json(base);
    m["param"] = param;
    m["values"] = values;
    std::cout << csv.str();
    m.write(out + ".manifest.json");
    return kOk;
  }
};

// synth

struct SynthCmd {
  again::SyntheticSpec spec;
  std::string out;
  int labeled_per_class = 0;
  again::Index test_count = 0;

  void add_to(CLI::App* app) {
    app->add_option("--out", out, "Dataset directory to create")->required();
    app->add_option("--nodes", spec.nodes, "Node count")->capture_default_str();
    app->add_option("--classes", spec.classes, "Class count")->capture_default_str();
    app->add_option("--features", spec.feature_dim, "Vocabulary size")->capture_default_str();
    app->add_option("--p-in", spec.p_in, "Edge probability within a class")->capture_default_str();
    app->add_option("--p-out", spec.p_out, "Edge probability across classes")->capture_default_str();
    app->add_option("--words", spec.words_per_node, "Words drawn per node")->capture_default_str();
    app->add_option("--purity", spec.topic_purity, "Chance a word comes from the node's class block")->capture_default_str();
    app->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
    app->add_option("--labeled", labeled_per_class, "Also write split.txt with this many labeled nodes per class");
    app->add_option("--test-count", test_count, "Test nodes in the written split");
  }

  int run(int argc, char** argv) {
    Manifest m("synth", argc, argv);
    const auto g = again::make_planted_partition(spec);
    const again::DatasetPaths p{out};
    fs::create_directories(p.dir);
    again::save_graph(g, p.edges().string(), p.features().string(), p.labels().string());
    for (const auto& f : {p.edges(), p.features(), p.labels()}) m.output(f);
    if (labeled_per_class > 0) {
      if (test_count < 1) throw usage_error("--labeled needs --test-count");
      again::save_split(again::make_split(g, labeled_per_class, test_count, spec.seed), g, p.split().string());
      m.output(p.split());
    }
    m.write(p.dir / "manifest.json");
    std::cout << "wrote " << g.node_count() << " nodes, " << g.edge_count() << " edges to " << out << "\n";
    return kOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-based graph encoder with adversarial prior matching: training and evaluation"};
  app.require_subcommand(1);
  TrainCmd train;
  EvalCmd eval;
  PerturbCmd perturb;
  EmbedCmd embed;
  GradCheckCmd gradcheck;
  SweepCmd sweep;
  SynthCmd synth;
  auto* c_train = app.add_subcommand("train", "Train a model and write checkpoint, log and manifest");
  auto* c_eval = app.add_subcommand("eval", "Accuracy on the unseen test nodes");
  auto* c_perturb = app.add_subcommand("perturb", "Accuracy under Gaussian feature noise over a (lambda, eta) grid");
  auto* c_embed = app.add_subcommand("embed", "Export node embeddings");
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient check on a toy graph");
  auto* c_sweep = app.add_subcommand("sweep", "Accuracy as one hyperparameter varies");
  auto* c_synth = app.add_subcommand("synth", "Generate a planted-partition dataset");
  train.add_to(c_train);
  eval.add_to(c_eval);
  perturb.add_to(c_perturb);
  embed.add_to(c_embed);
  gradcheck.add_to(c_grad);
  sweep.add_to(c_sweep);
  synth.add_to(c_synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (c_train->parsed()) return train.run(argc, argv);
    if (c_eval->parsed()) return eval.run(argc, argv);
    if (c_perturb->parsed()) return perturb.run(argc, argv);
    if (c_embed->parsed()) return embed.run(argc, argv);
    if (c_grad->parsed()) return gradcheck.run();
    if (c_sweep->parsed()) return sweep.run(argc, argv);
    if (c_synth->parsed()) return synth.run(argc, argv);
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const again::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
