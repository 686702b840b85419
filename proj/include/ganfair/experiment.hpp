#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ganfair/config.hpp"
#include "ganfair/dataset.hpp"
#include "ganfair/ensemble.hpp"
#include "ganfair/fairness.hpp"
#include "ganfair/gan.hpp"
#include "ganfair/svg.hpp"

namespace ganfair {

struct ExperimentConfig {
  enum class DatasetKind { Mixture, Ring, Patches };
  enum class ModelKind { Gan, Cgan, Ensemble };

  DatasetKind dataset_kind = DatasetKind::Mixture;
  std::vector<double> proportions = {0.5, 0.5};
  std::size_t data_n = 2000;
  double sigma = 0.5;
  std::size_t ring_groups = 8;
  double ring_radius = 3.0;
  double patch_noise_sigma = 0.05;
  std::uint64_t dataset_seed = 42;

  ModelKind model = ModelKind::Gan;
  TrainConfig train;
  EnsembleConfig ensemble;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::size_t eval_samples = 1000;
  std::size_t purity_samples = 500;

  std::string assigner_kind = "auto";  // auto | mean_threshold | nearest_center
  double assigner_tau = 0.5;
  std::string target_kind = "proportions";  // proportions | uniform | explicit
  std::vector<double> target_explicit;

  std::string out_dir;
  std::size_t parallel = 1;
  bool scatter = true;

  std::string raw_text;       // original config bytes, for the snapshot
  std::string snapshot_name = "config_snapshot.toml";

  const char* model_name() const {
    switch (model) {
      case ModelKind::Gan: return "gan";
      case ModelKind::Cgan: return "cgan";
      case ModelKind::Ensemble: return "ensemble";
    }
    return "?";
  }

  const char* dataset_name() const {
    switch (dataset_kind) {
      case DatasetKind::Mixture: return "mixture";
      case DatasetKind::Ring: return "ring";
      case DatasetKind::Patches: return "patches";
    }
    return "?";
  }

  static ExperimentConfig from_kv(const KvConfig& kv) {
    ExperimentConfig c;

    const std::string kind = kv.get_string("dataset.kind", "mixture");
    if (kind == "mixture") {
      c.dataset_kind = DatasetKind::Mixture;
    } else if (kind == "ring") {
      c.dataset_kind = DatasetKind::Ring;
    } else if (kind == "patches") {
      c.dataset_kind = DatasetKind::Patches;
    } else {
      throw config_error("dataset.kind", "unknown dataset kind '" + kind + "'");
    }
    c.ring_groups =
        read_size(kv, "dataset.groups", c.dataset_kind == DatasetKind::Ring ? 8 : 2);
    if (c.dataset_kind == DatasetKind::Ring) {
      c.proportions.assign(c.ring_groups, 1.0 / static_cast<double>(c.ring_groups));
    }
    c.proportions = kv.get_double_array("dataset.proportions", c.proportions);
    double total = 0.0;
    for (double p : c.proportions) {
      if (p < 0.0) {
        throw config_error("dataset.proportions", "entries must be >= 0");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      std::ostringstream os;
      os << "must sum to 1, got " << total;
      throw config_error("dataset.proportions", os.str());
    }
    c.data_n = read_size(kv, "dataset.n", 2000);
    c.sigma = kv.get_double(
        "dataset.sigma", c.dataset_kind == DatasetKind::Ring ? 0.3 : 0.5);
    if (!(c.sigma > 0.0)) {
      throw config_error("dataset.sigma", "must be > 0");
    }
    c.ring_radius = kv.get_double("dataset.radius", 3.0);
    c.patch_noise_sigma = kv.get_double("dataset.noise_sigma", 0.05);
    c.dataset_seed =
        static_cast<std::uint64_t>(kv.get_int("dataset.seed", 42));

    const std::string model = kv.get_string("experiment.model", "gan");
    if (model == "gan") {
      c.model = ModelKind::Gan;
    } else if (model == "cgan") {
      c.model = ModelKind::Cgan;
    } else if (model == "ensemble") {
      c.model = ModelKind::Ensemble;
    } else {
      throw config_error("experiment.model", "unknown model '" + model + "'");
    }
    c.seeds = kv.get_u64_array("experiment.seeds", c.seeds);
    if (c.seeds.empty()) {
      throw config_error("experiment.seeds", "must list at least one seed");
    }
    if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() !=
        c.seeds.size()) {
      throw config_error("experiment.seeds", "seeds must be distinct");
    }
    c.eval_samples = read_size(kv, "experiment.eval_samples", 1000);
    c.purity_samples = read_size(kv, "experiment.purity_samples", 500);
    c.parallel = read_size(kv, "experiment.parallel", 1);
    c.scatter = kv.get_bool("experiment.scatter", true);
    c.out_dir = kv.get_string("experiment.out_dir", "");

    c.train.steps = read_size(kv, "train.steps", 3000);
    c.train.batch_size = read_size(kv, "train.batch", 64);
    const std::size_t default_noise =
        c.dataset_kind == DatasetKind::Patches ? 8 : 2;
    c.train.noise_dim = read_size(kv, "train.noise_dim", default_noise);
    c.train.lr_g = kv.get_double("train.lr_g", 2e-4);
    c.train.lr_d = kv.get_double("train.lr_d", 2e-4);
    c.train.beta1 = kv.get_double("train.beta1", 0.5);
    c.train.beta2 = kv.get_double("train.beta2", 0.999);
    c.train.adam_eps = kv.get_double("train.adam_eps", 1e-8);
    c.train.d_steps = read_size(kv, "train.d_steps", 1);
    try {
      c.train.gen_loss =
          parse_gen_loss_mode(kv.get_string("train.gen_loss", "non_saturating"));
      c.train.validate();
    } catch (const std::invalid_argument& err) {
      throw config_error("train", err.what());
    }

    c.ensemble.k = read_size(kv, "ensemble.k", 4);
    c.ensemble.m = read_size(kv, "ensemble.m", 50);
    c.ensemble.lambda = kv.get_double("ensemble.lambda", 0.1);
    c.ensemble.eps_var = kv.get_double("ensemble.eps_var", 1e-6);
    c.ensemble.eps_dist = kv.get_double("ensemble.eps_dist", 1e-6);
    c.ensemble.stage = c.train;
    if (c.model == ModelKind::Ensemble) {
      try {
        c.ensemble.validate();
      } catch (const std::invalid_argument& err) {
        throw config_error("ensemble", err.what());
      }
    }

    c.assigner_kind = kv.get_string("assigner.kind", "auto");
    if (c.assigner_kind != "auto" && c.assigner_kind != "mean_threshold" &&
        c.assigner_kind != "nearest_center") {
      throw config_error("assigner.kind",
                         "unknown assigner '" + c.assigner_kind + "'");
    }
    c.assigner_tau = kv.get_double("assigner.tau", 0.5);

    const std::string target = kv.get_string("experiment.target", "proportions");
    if (target == "proportions" || target == "uniform") {
      c.target_kind = target;
    } else if (!target.empty() && target.front() == '[') {
      c.target_kind = "explicit";
      c.target_explicit = kv.get_double_array("experiment.target", {});
      double tsum = 0.0;
      for (double t : c.target_explicit) tsum += t;
      if (std::abs(tsum - 1.0) > 1e-9) {
        throw config_error("experiment.target", "must sum to 1");
      }
    } else {
      throw config_error("experiment.target",
                         "expected proportions, uniform, or an array");
    }
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::string raw;
    const KvConfig kv = load_config_file(path, &raw);
    ExperimentConfig c = from_kv(kv);
    c.raw_text = raw;
    const bool json =
        path.size() >= 5 && path.substr(path.size() - 5) == ".json";
    c.snapshot_name = json ? "config_snapshot.json" : "config_snapshot.toml";
    return c;
  }

  GroupedDataset build_dataset() const {
    Rng rng(dataset_seed);
    switch (dataset_kind) {
      case DatasetKind::Mixture:
        return make_two_mode_mixture(proportions, data_n, rng, sigma);
      case DatasetKind::Ring: {
        if (proportions.size() != ring_groups) {
          throw config_error("dataset.proportions",
                             "length must match dataset.groups");
        }
        return make_gaussian_mixture(
            ring_centers(ring_groups, ring_radius),
            std::vector<double>(ring_groups, sigma), proportions, data_n, rng);
      }
      case DatasetKind::Patches:
        return make_inverted_patches(default_patch_prototypes(), proportions,
                                     data_n, patch_noise_sigma, rng);
    }
    throw std::logic_error("build_dataset: unreachable");
  }

  GroupAssigner build_assigner(const GroupedDataset& data) const {
    if (assigner_kind == "mean_threshold" ||
        (assigner_kind == "auto" && dataset_kind == DatasetKind::Patches)) {
      return GroupAssigner::mean_threshold(assigner_tau);
    }
    if (data.centers.empty()) {
      throw config_error("assigner.kind",
                         "nearest_center needs a mixture dataset");
    }
    return GroupAssigner::nearest_center(data.centers);
  }

  std::vector<double> resolve_target(const GroupedDataset& data) const {
    if (target_kind == "uniform") {
      return std::vector<double>(data.groups(),
                                 1.0 / static_cast<double>(data.groups()));
    }
    if (target_kind == "explicit") {
      if (target_explicit.size() != data.groups()) {
        throw config_error("experiment.target", "length must match group count");
      }
      return target_explicit;
    }
    return data.proportions;
  }

 private:
  static std::size_t read_size(const KvConfig& kv, const std::string& key,
                               std::size_t fallback) {
    const std::int64_t v =
        kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw config_error(key, "must be >= 0");
    return static_cast<std::size_t>(v);
  }
};

struct PurityRow {
  std::string run_id;
  std::uint64_t seed = 0;
  int label = 0;
  std::size_t n = 0;
  double purity = 0.0;
};

namespace detail {

struct RunResult {
  GroupRateReport report;
  std::vector<PurityRow> purity;
  bool diverged = false;
};

inline GroupRateReport diverged_report(const ExperimentConfig& config,
                                       std::uint64_t seed,
                                       const std::vector<double>& target,
                                       const std::string& assigner,
                                       const std::string& what) {
  GroupRateReport report;
  const std::size_t k = target.size();
  report.counts.assign(k, 0);
  report.rates.assign(k, std::nan(""));
  report.total = 0;
  report.assigner = assigner;
  report.target = target;
  report.tv = std::nan("");
  report.run_id = "seed" + std::to_string(seed);
  report.seed = seed;
  report.model = config.model_name();
  report.dataset = config.dataset_name();
  report.status = "diverged";
  std::cerr << "run seed" << seed << " diverged: " << what << '\n';
  return report;
}

inline RunResult run_single_seed(const ExperimentConfig& config,
                                 const GroupedDataset& data,
                                 const GroupAssigner& assigner,
                                 const std::vector<double>& target,
                                 std::uint64_t seed,
                                 const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  RunResult result;
  Rng rng(seed);
  const std::string run_id = "seed" + std::to_string(seed);
  try {
    fs::create_directories(run_dir);
    Tensor samples;
    TrainConfig train = config.train;
    train.seed = seed;
    if (config.model == ExperimentConfig::ModelKind::Gan) {
      const TrainedGan trained = train_gan(data, train, rng);
      samples = sample_generator(trained.gen, config.eval_samples, rng);
      save_mlp(trained.gen.net, (run_dir / "model.txt").string());
      std::ofstream hist((run_dir / "history.csv").string(), std::ios::binary);
      write_history_csv(trained.history, hist);
    } else if (config.model == ExperimentConfig::ModelKind::Cgan) {
      const TrainedCGan trained = train_cgan(data, train, rng);
      samples = sample_unconditional(trained.gen, config.eval_samples, rng);
      save_mlp(trained.gen.net, (run_dir / "model.txt").string());
      std::ofstream hist((run_dir / "history.csv").string(), std::ios::binary);
      write_history_csv(trained.history, hist);
      for (std::size_t label = 0; label < data.groups(); ++label) {
        const Tensor conditioned =
            sample_generator(trained.gen, config.purity_samples, rng,
                             static_cast<int>(label));
        PurityRow row;
        row.run_id = run_id;
        row.seed = seed;
        row.label = static_cast<int>(label);
        row.n = config.purity_samples;
        row.purity = conditional_purity(conditioned, assigner,
                                        static_cast<int>(label));
        result.purity.push_back(row);
      }
    } else {
      EnsembleConfig econfig = config.ensemble;
      econfig.stage = train;
      const GeneratorEnsemble ensemble =
          train_boosted_ensemble(data, econfig, rng);
      samples = ensemble_sample(ensemble, config.eval_samples, rng);
      save_ensemble(ensemble, (run_dir / "ensemble").string());
    }

    const std::vector<int> assigned = assigner.assign_all(samples);
    write_samples_csv(samples, assigned, (run_dir / "samples.csv").string());
    if (config.scatter) {
      emit_scatter_svg(samples, assigned, (run_dir / "scatter.svg").string());
    }
    result.report = group_rates(samples, assigner, target.size(), target);
    result.report.run_id = run_id;
    result.report.seed = seed;
    result.report.model = config.model_name();
    result.report.dataset = config.dataset_name();
  } catch (const numeric_error& err) {
    result.diverged = true;
    result.report =
        diverged_report(config, seed, target, assigner.describe(), err.what());
    result.purity.clear();
  }
  return result;
}

inline std::string timestamp_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[64];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace detail

inline void write_purity_csv(const std::vector<PurityRow>& rows,
                             const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_purity_csv: cannot write " + path);
  os << "run_id,seed,label,n,purity\n";
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", row.purity);
    os << row.run_id << ',' << row.seed << ',' << row.label << ',' << row.n
       << ',' << buf << '\n';
  }
}

// Runs every seed (in up to `parallel` shared-nothing workers), writes the
// run directories plus metrics.csv sorted by seed, and returns 0 on success
// or 4 when every seed diverged.
inline int run_experiment(const ExperimentConfig& config,
                          const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (out_dir.empty()) {
    throw std::runtime_error("run_experiment: no output directory given");
  }
  fs::create_directories(out_dir);
  const std::string started = detail::timestamp_now();

  const GroupedDataset data = config.build_dataset();
  const GroupAssigner assigner = config.build_assigner(data);
  const std::vector<double> target = config.resolve_target(data);

  std::vector<detail::RunResult> results(config.seeds.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(config.parallel, config.seeds.size()));
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= config.seeds.size()) break;
      const std::uint64_t seed = config.seeds[i];
      results[i] = detail::run_single_seed(
          config, data, assigner, target, seed,
          fs::path(out_dir) / ("seed" + std::to_string(seed)));
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<GroupRateReport> reports;
  std::vector<PurityRow> purity;
  for (const auto& r : results) {
    reports.push_back(r.report);
    purity.insert(purity.end(), r.purity.begin(), r.purity.end());
  }
  std::sort(reports.begin(), reports.end(),
            [](const GroupRateReport& a, const GroupRateReport& b) {
              return a.seed < b.seed;
            });
  std::sort(purity.begin(), purity.end(), [](const PurityRow& a,
                                             const PurityRow& b) {
    return a.seed != b.seed ? a.seed < b.seed : a.label < b.label;
  });
  write_report_csv(reports, (fs::path(out_dir) / "metrics.csv").string());
  if (config.model == ExperimentConfig::ModelKind::Cgan) {
    write_purity_csv(purity, (fs::path(out_dir) / "purity.csv").string());
  }
  {
    std::ofstream snap((fs::path(out_dir) / config.snapshot_name).string(),
                       std::ios::binary);
    if (!snap) throw std::runtime_error("run_experiment: cannot write snapshot");
    snap << config.raw_text;
  }
  {
    std::ofstream meta((fs::path(out_dir) / "meta").string(), std::ios::binary);
    meta << "started " << started << "\nfinished " << detail::timestamp_now()
         << "\n";
  }

  std::size_t diverged = 0;
  for (const auto& r : results) diverged += r.diverged;
  std::cout << "experiment: " << config.seeds.size() << " runs, " << diverged
            << " diverged, metrics at "
            << (fs::path(out_dir) / "metrics.csv").string() << '\n';
  return diverged == config.seeds.size() ? 4 : 0;
}

}  // namespace ganfair
