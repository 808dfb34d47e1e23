#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "frozencil/dataio.hpp"
#include "frozencil/error.hpp"
#include "frozencil/report.hpp"
#include "frozencil/runner.hpp"

namespace fc = frozencil;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fc::Error(fc::ErrorCode::kIo, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw fc::Error(fc::ErrorCode::kIo, "cannot open '" + out_path + "' for writing");
  out << text;
  if (!out) throw fc::Error(fc::ErrorCode::kIo, "write failed for '" + out_path + "'");
}

fc::ClassOrder parse_order(const std::string& word) {
  if (word == "contiguous") return fc::ClassOrder::kContiguous;
  if (word == "shuffled") return fc::ClassOrder::kShuffled;
  throw fc::Error(fc::ErrorCode::kConfig, "order must be 'contiguous' or 'shuffled'");
}

std::string schedule_json(const fc::TaskSchedule& s) {
  nlohmann::json j;
  j["tasks"] = s.num_tasks();
  j["classes"] = s.tasks();
  return j.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replay-free class-incremental learning over frozen embeddings"};
  app.require_subcommand(1);

  // synth
  fc::SynthSpec synth;
  std::string synth_out;
  std::string synth_format = "embd";
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic Gaussian-blob dataset");
  synth_cmd->add_option("--classes", synth.n_classes, "Number of classes")->capture_default_str();
  synth_cmd->add_option("--dim", synth.dim, "Embedding dimension")->capture_default_str();
  synth_cmd->add_option("--per-class", synth.samples_per_class, "Samples per class")->capture_default_str();
  synth_cmd->add_option("--scale", synth.mean_scale, "Distance of class centres from the origin")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise_std, "Isotropic noise std")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
  synth_cmd->add_option("--format", synth_format, "embd or csv")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output path")->required();

  // schedule
  std::string sched_data, sched_format = "embd", sched_config, sched_order = "contiguous";
  std::size_t sched_classes = 0, sched_tasks = 2;
  std::uint64_t sched_seed = 0;
  auto* sched_cmd = app.add_subcommand("schedule", "Print a task schedule as JSON");
  sched_cmd->add_option("--config", sched_config, "Experiment config whose schedule to resolve");
  sched_cmd->add_option("--data", sched_data, "Dataset providing the class count");
  sched_cmd->add_option("--data-format", sched_format, "embd or csv")->capture_default_str();
  sched_cmd->add_option("--classes", sched_classes, "Class count (instead of --data)");
  sched_cmd->add_option("--tasks", sched_tasks, "Number of tasks")->capture_default_str();
  sched_cmd->add_option("--order", sched_order, "contiguous or shuffled")->capture_default_str();
  sched_cmd->add_option("--order-seed", sched_seed, "Seed for shuffled order")->capture_default_str();

  // run
  std::string run_config, run_data, run_data_format = "embd", run_method = "mlp", run_order = "contiguous";
  std::string run_out, run_ckpt, run_name;
  std::size_t run_tasks = 2;
  std::vector<std::uint64_t> run_seeds;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment and write a results bundle");
  run_cmd->add_option("--config", run_config, "Experiment config JSON");
  run_cmd->add_option("--data", run_data, "Dataset path");
  run_cmd->add_option("--data-format", run_data_format, "embd or csv")->capture_default_str();
  run_cmd->add_option("--name", run_name, "Dataset label for reports");
  run_cmd->add_option("--method", run_method, "mlp, single, joint or nmc:<variant>")->capture_default_str();
  run_cmd->add_option("--tasks", run_tasks, "Number of tasks")->capture_default_str();
  run_cmd->add_option("--order", run_order, "contiguous or shuffled")->capture_default_str();
  run_cmd->add_option("--seed", run_seeds, "Seed (repeatable)");
  run_cmd->add_option("--out", run_out, "Bundle output path (stdout when omitted)");
  run_cmd->add_option("--checkpoint-dir", run_ckpt, "Directory for model checkpoints");

  // report
  std::vector<std::string> report_bundles;
  std::string report_format = "md", report_out;
  auto* report_cmd = app.add_subcommand("report", "Render one or more results bundles");
  report_cmd->add_option("--bundle", report_bundles, "Bundle JSON (repeatable)")->required();
  report_cmd->add_option("--format", report_format, "md, csv or json")->capture_default_str();
  report_cmd->add_option("--out", report_out, "Output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed()) {
      const auto dataset = fc::generate_synthetic(synth);
      fc::save_dataset(dataset, synth_out, fc::parse_dataset_format(synth_format));
    } else if (sched_cmd->parsed()) {
      fc::TaskSchedule schedule;
      if (!sched_config.empty()) {
        const auto cfg = fc::load_experiment_config(sched_config);
        const auto dataset = fc::load_dataset(cfg.dataset_path, cfg.dataset_format);
        schedule = fc::build_schedule(cfg.schedule, dataset.num_classes());
      } else {
        std::size_t n = sched_classes;
        if (!sched_data.empty()) n = fc::load_dataset(sched_data, fc::parse_dataset_format(sched_format)).num_classes();
        if (n == 0) throw fc::Error(fc::ErrorCode::kConfig, "need --config, --data or --classes");
        fc::ScheduleConfig sc;
        sc.tasks = sched_tasks;
        sc.order = parse_order(sched_order);
        sc.order_seed = sched_seed;
        schedule = fc::build_schedule(sc, n);
      }
      std::cout << schedule_json(schedule);
    } else if (run_cmd->parsed()) {
      fc::ExperimentConfig cfg;
      if (!run_config.empty()) {
        cfg = fc::load_experiment_config(run_config);
      } else {
        if (run_data.empty()) throw fc::Error(fc::ErrorCode::kConfig, "need --config or --data");
        cfg.dataset_path = run_data;
        cfg.dataset_format = fc::parse_dataset_format(run_data_format);
        cfg.method = run_method;
        cfg.schedule.tasks = run_tasks;
        cfg.schedule.order = parse_order(run_order);
        if (!run_seeds.empty()) cfg.seeds = run_seeds;
        fc::parse_method(cfg.method);
      }
      if (!run_name.empty()) cfg.dataset_name = run_name;
      fc::RunOptions options;
      if (!run_ckpt.empty()) options.checkpoint_dir = run_ckpt;
      const auto bundle = fc::run_experiment(cfg, options);
      emit(fc::bundle_to_json(bundle), run_out);
    } else if (report_cmd->parsed()) {
      std::vector<fc::ResultsBundle> bundles;
      for (const auto& path : report_bundles) bundles.push_back(fc::bundle_from_json(slurp(path)));
      emit(fc::render_report(bundles, fc::parse_report_format(report_format)), report_out);
    }
  } catch (const fc::Error& e) {
    std::fprintf(stderr, "frozencil: %s: %s\n", std::string(fc::to_string(e.code())).c_str(), e.what());
    return fc::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "frozencil: %s\n", e.what());
    return 3;
  }
  return 0;
}
