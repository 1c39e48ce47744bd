#include "cosca/cli.hpp"

#include <CLI11.hpp>

#include <cstddef>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "cosca/config.hpp"
#include "cosca/gradcheck.hpp"
#include "cosca/report.hpp"
#include "cosca/trainer.hpp"

namespace cosca::cli {

namespace {

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const train::NanAbort& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string acc_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int cmd_run(const std::string& config_path) {
  const auto cfg = config::load_config(config_path);
  auto shift = config::build_dataset(cfg.dataset);
  data::standardize(shift.source, shift.target);
  std::filesystem::create_directories(cfg.output.dir);

  const auto out = train::train(cfg.train, shift.source, shift.target, shift.target_truth);

  const std::string dir = cfg.output.dir;
  report::write_metrics_jsonl(dir + "/metrics.jsonl", out.record, cfg.train.iters_per_epoch);

  report::FinalSummary summary;
  summary.variant = train::variant_name(cfg.train.variant);
  summary.seed = cfg.train.seed;
  summary.last_iter = out.record.iters.back();
  summary.last_epoch = out.record.epochs.back();
  summary.target_eval = shift.target_truth.empty()
                            ? train::EvalResult{-1.0, -1.0, -1.0}
                            : train::evaluate(out.model, shift.target, shift.target_truth);
  report::write_final_json(dir + "/final.json", summary);
  write_text(dir + "/config.ini", config::serialize_config(cfg));

  if (cfg.output.save_checkpoint) models::save_checkpoint(dir + "/model.ckpt", out.model);
  if (cfg.output.export_embeddings)
    report::write_embeddings_csv(dir + "/embeddings.csv", out.model, shift.source, shift.target,
                                 shift.target_truth);

  std::cout << "run complete: variant=" << summary.variant << " seed=" << summary.seed
            << " source_acc=" << acc_str(summary.last_epoch.source_acc)
            << " target_acc=" << acc_str(summary.last_epoch.target_acc) << "\n"
            << "outputs in " << dir << "\n";
  return 0;
}

int cmd_ablation(const std::string& config_path, std::vector<std::string> variants,
                 std::vector<std::uint64_t> seeds) {
  const auto cfg = config::load_config(config_path);
  if (variants.empty())
    variants = {"source_only", "mcd", "mcd_mmd", "mcd_contras", "cosca"};
  if (seeds.empty()) seeds = {0, 1, 2, 3, 4};
  for (const auto& name : variants) train::variant_from_name(name);  // fail before training

  auto shift = config::build_dataset(cfg.dataset);
  if (shift.target_truth.empty())
    throw config::ConfigError("ablation needs target truth to score the variants");
  data::standardize(shift.source, shift.target);
  std::filesystem::create_directories(cfg.output.dir);

  const std::size_t n_cells = variants.size() * seeds.size();
  std::vector<report::AblationCell> cells(n_cells);
  std::exception_ptr first_error;

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(n_cells); ++idx) {
    const std::size_t u = static_cast<std::size_t>(idx);
    auto& cell = cells[u];
    cell.variant = variants[u / seeds.size()];
    cell.seed = seeds[u % seeds.size()];
    try {
      auto tcfg = cfg.train;
      tcfg.variant = train::variant_from_name(cell.variant);
      tcfg.seed = cell.seed;
      const auto out = train::train(tcfg, shift.source, shift.target, shift.target_truth);
      cell.eval = train::evaluate(out.model, shift.target, shift.target_truth);
    } catch (const train::NanAbort&) {
      cell.failed = true;
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  report::write_ablation_csv(cfg.output.dir + "/ablation.csv", cells);
  std::cout << report::ablation_summary(cells) << "results in " << cfg.output.dir
            << "/ablation.csv\n";
  return 0;
}

int cmd_gendata(const std::string& spec_path, const std::string& out_dir) {
  const auto cfg = config::load_config(spec_path);
  const auto shift = config::build_dataset(cfg.dataset);
  std::filesystem::create_directories(out_dir);
  data::save_csv(shift.source, out_dir + "/source.csv");
  data::save_csv(shift.target, out_dir + "/target.csv");
  if (!shift.target_truth.empty())
    data::save_labels_csv(shift.target_truth, out_dir + "/target_truth.csv");
  std::cout << "wrote " << shift.source.size() << " source and " << shift.target.size()
            << " target samples to " << out_dir << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int instances, bool corrupt) {
  return gradcheck::run_gradcheck(std::cout, seed, instances, corrupt) ? 0 : 1;
}

int cmd_export_embeddings(const std::string& checkpoint_path, const std::string& data_config,
                          const std::string& out_path) {
  const auto model = models::load_checkpoint(checkpoint_path);
  const auto cfg = config::load_config(data_config);
  auto shift = config::build_dataset(cfg.dataset);
  data::standardize(shift.source, shift.target);
  report::write_embeddings_csv(out_path, model, shift.source, shift.target, shift.target_truth);
  std::cout << "wrote " << (shift.source.size() + shift.target.size()) << " rows to " << out_path
            << "\n";
  return 0;
}

}  // namespace

int run_main(int argc, char** argv) {
  CLI::App app{"adversarial domain adaptation on tabular data"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "train one configuration and write its reports");
  run->add_option("config", run_config, "experiment config file")->required();

  std::string abl_config;
  std::vector<std::string> abl_variants;
  std::vector<std::uint64_t> abl_seeds;
  auto* abl = app.add_subcommand("ablation", "train a variant x seed grid and summarize it");
  abl->add_option("config", abl_config, "experiment config file")->required();
  abl->add_option("--variants", abl_variants, "variants to run (default: all five)")
      ->delimiter(',');
  abl->add_option("--seeds", abl_seeds, "seeds to run (default: 0..4)")->delimiter(',');

  std::string gen_spec, gen_out;
  auto* gen = app.add_subcommand("gen-data", "write a generated dataset as csv files");
  gen->add_option("spec", gen_spec, "config file with a [dataset] section")->required();
  gen->add_option("--out", gen_out, "output directory")->required();

  std::uint64_t gc_seed = 0;
  int gc_instances = 20;
  bool gc_corrupt = false;
  auto* gc = app.add_subcommand("gradcheck", "compare analytic gradients to finite differences");
  gc->add_option("--seed", gc_seed, "base seed");
  gc->add_option("--instances", gc_instances, "random instances per loss")
      ->check(CLI::PositiveNumber);
  gc->add_flag("--_corrupt", gc_corrupt)->group("");

  std::string ee_ckpt, ee_data, ee_out;
  auto* ee = app.add_subcommand("export-embeddings",
                                "project a checkpoint's features for plotting");
  ee->add_option("checkpoint", ee_ckpt, "model checkpoint file")->required();
  ee->add_option("data", ee_data, "config file with a [dataset] section")->required();
  ee->add_option("--out", ee_out, "output csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*run) return guarded([&] { return cmd_run(run_config); });
  if (*abl) return guarded([&] { return cmd_ablation(abl_config, abl_variants, abl_seeds); });
  if (*gen) return guarded([&] { return cmd_gendata(gen_spec, gen_out); });
  if (*gc) return guarded([&] { return cmd_gradcheck(gc_seed, gc_instances, gc_corrupt); });
  if (*ee) return guarded([&] { return cmd_export_embeddings(ee_ckpt, ee_data, ee_out); });
  return 1;
}

}  // namespace cosca::cli
