#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ganfair/ganfair.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, sep)) out.push_back(item);
  return out;
}

// "mean_threshold[:tau]" or "nearest_center:x,y;x,y;..."
ganfair::GroupAssigner parse_assigner(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string args =
      colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "mean_threshold") {
    return ganfair::GroupAssigner::mean_threshold(
        args.empty() ? 0.5 : std::stod(args));
  }
  if (kind == "nearest_center") {
    if (args.empty()) {
      throw ganfair::config_error("--assigner",
                                  "nearest_center needs centers like -3,0;3,0");
    }
    std::vector<std::vector<double>> centers;
    for (const std::string& group : split(args, ';')) {
      std::vector<double> center;
      for (const std::string& coord : split(group, ',')) {
        center.push_back(std::stod(coord));
      }
      centers.push_back(std::move(center));
    }
    return ganfair::GroupAssigner::nearest_center(std::move(centers));
  }
  throw ganfair::config_error("--assigner", "unknown assigner '" + kind + "'");
}

std::vector<double> parse_target(const std::string& spec, std::size_t k) {
  if (spec == "uniform") {
    return std::vector<double>(k, 1.0 / static_cast<double>(k));
  }
  std::vector<double> target;
  for (const std::string& cell : split(spec, ',')) {
    target.push_back(std::stod(cell));
  }
  if (target.size() != k) {
    throw ganfair::config_error(
        "--target", "needs " + std::to_string(k) + " entries or 'uniform'");
  }
  double total = 0.0;
  for (double t : target) total += t;
  if (std::abs(total - 1.0) > 1e-9) {
    throw ganfair::config_error("--target", "must sum to 1");
  }
  return target;
}

int cmd_experiment(const std::string& config_path, const std::string& out_flag,
                   std::size_t parallel_flag) {
  ganfair::ExperimentConfig config = ganfair::ExperimentConfig::load(config_path);
  if (parallel_flag > 0) config.parallel = parallel_flag;
  if (const char* env = std::getenv("GANFAIR_THREADS")) {
    config.parallel = static_cast<std::size_t>(std::stoul(env));
  }
  std::string out = out_flag.empty() ? config.out_dir : out_flag;
  if (out.empty()) {
    throw ganfair::config_error("experiment.out_dir",
                                "give --out or set experiment.out_dir");
  }
  return ganfair::run_experiment(config, out);
}

int cmd_sample(const std::string& model_path, std::size_t n,
               std::optional<int> label, std::size_t groups,
               std::uint64_t seed, const std::string& out_path) {
  ganfair::Generator gen;
  gen.net = ganfair::load_mlp(model_path);
  gen.groups = groups;
  if (groups > 0) {
    if (gen.net.input_width() <= groups) {
      throw ganfair::config_error("--groups",
                                  "exceeds the model's input width");
    }
    gen.noise_dim = gen.net.input_width() - groups;
  } else {
    gen.noise_dim = gen.net.input_width();
  }
  ganfair::Rng rng(seed);
  const ganfair::Tensor samples =
      ganfair::sample_generator(gen, n, rng, label);
  std::vector<int> labels(samples.rows(), label.value_or(0));
  ganfair::write_samples_csv(samples, labels, out_path);
  std::cout << "wrote " << samples.rows() << " samples to " << out_path << '\n';
  return 0;
}

int cmd_evaluate(const std::string& samples_path, const std::string& assigner_spec,
                 const std::string& target_spec, const std::string& out_path) {
  const ganfair::LabeledSamples loaded =
      ganfair::read_samples_csv(samples_path);
  const ganfair::GroupAssigner assigner = parse_assigner(assigner_spec);
  const std::size_t k = assigner.group_count();
  const std::vector<double> target = parse_target(target_spec, k);
  ganfair::GroupRateReport report =
      ganfair::group_rates(loaded.samples, assigner, k, target);
  report.run_id = "eval";
  report.model = "external";
  report.dataset = std::filesystem::path(samples_path).filename().string();
  ganfair::write_report_rows({report}, std::cout);
  if (!out_path.empty()) {
    ganfair::write_report_csv({report}, out_path);
  }
  return 0;
}

int cmd_gradcheck(std::size_t points, std::uint64_t seed) {
  const auto results = ganfair::run_gradient_suite(points, seed);
  bool ok = true;
  for (const auto& r : results) {
    const bool pass = r.max_error < 1e-4;
    ok = ok && pass;
    std::printf("%-32s max rel err %.3e  %s\n", r.name.c_str(), r.max_error,
                pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GAN group-representation benchmark"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::size_t parallel = 0;
  auto* experiment = app.add_subcommand(
      "experiment", "Run a multi-seed training + evaluation study");
  experiment->add_option("--config", config_path, "TOML or JSON config file")
      ->required();
  experiment->add_option("--out", out_dir, "Output directory");
  experiment->add_option("--parallel", parallel, "Worker count");

  std::string model_path, sample_out;
  std::size_t sample_n = 1000, sample_groups = 0;
  int sample_label = -1;
  std::uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "Draw samples from a checkpoint");
  sample->add_option("--model", model_path, "Model checkpoint file")->required();
  sample->add_option("--n", sample_n, "Sample count");
  sample->add_option("--label", sample_label, "Condition label (conditional models)");
  sample->add_option("--groups", sample_groups,
                     "Group count of a conditional model (0 = unconditional)");
  sample->add_option("--seed", sample_seed, "Noise seed");
  sample->add_option("--out", sample_out, "Output CSV path")->required();

  std::string eval_samples, eval_assigner, eval_target = "uniform", eval_out;
  auto* evaluate =
      app.add_subcommand("evaluate", "Group rates of a samples CSV");
  evaluate->add_option("--samples", eval_samples, "Samples CSV")->required();
  evaluate
      ->add_option("--assigner", eval_assigner,
                   "mean_threshold[:tau] or nearest_center:x,y;x,y")
      ->required();
  evaluate->add_option("--target", eval_target,
                       "uniform or comma-separated proportions");
  evaluate->add_option("--out", eval_out, "Also write the report CSV here");

  std::size_t grad_points = 20;
  std::uint64_t grad_seed = 7;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck->add_option("--points", grad_points, "Random points per op");
  gradcheck->add_option("--seed", grad_seed, "Suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (experiment->parsed()) {
      return cmd_experiment(config_path, out_dir, parallel);
    }
    if (sample->parsed()) {
      std::optional<int> label;
      if (sample->count("--label") > 0) label = sample_label;
      return cmd_sample(model_path, sample_n, label, sample_groups,
                        sample_seed, sample_out);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(eval_samples, eval_assigner, eval_target, eval_out);
    }
    if (gradcheck->parsed()) {
      return cmd_gradcheck(grad_points, grad_seed);
    }
  } catch (const ganfair::config_error& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitIo;
  }
  return 0;
}
