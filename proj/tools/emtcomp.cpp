// Command line front end: dataset simulation, ensemble training, evaluation
// and a streaming compensation filter.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "emt/cli.hpp"
#include "emt/sim.hpp"

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("EMTCOMP_SEED")) {
    try {
      return static_cast<std::uint64_t>(emt::parse_long(env));
    } catch (const emt::DataError&) {
      throw emt::ConfigError("EMTCOMP_SEED must be an integer");
    }
  }
  return 0;
}

void add_schedule_flags(CLI::App* cmd, emt::TrainSchedule& schedule) {
  cmd->add_option("--epochs", schedule.total_epochs, "Training epochs")
      ->capture_default_str();
  cmd->add_option("--decay-start", schedule.decay_start_epoch,
                  "Epoch at which the linear learning-rate decay begins")
      ->capture_default_str();
  cmd->add_option("--lr", schedule.base_lr, "Base Adam learning rate")
      ->capture_default_str();
  cmd->add_option("--batch-size", schedule.batch_size, "Minibatch size")
      ->capture_default_str();
}

void add_weight_flags(CLI::App* cmd, emt::LossWeights& weights) {
  cmd->add_option("--lambda-adv", weights.adv, "Adversarial loss weight")
      ->capture_default_str();
  cmd->add_option("--lambda-cycle", weights.cycle, "Cycle-consistency loss weight")
      ->capture_default_str();
  cmd->add_option("--lambda-comp", weights.comp, "Pairwise-distance loss weight")
      ->capture_default_str();
  cmd->add_option("--lambda-quality", weights.quality, "Quality penalty weight")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electromagnetic tracking error compensation toolkit"};
  app.require_subcommand(1);

  emt::SimulateOptions sim_opts;
  emt::TrainOptions train_opts;
  emt::EvaluateOptions eval_opts;
  std::filesystem::path compensate_ensemble;
  std::string train_mode = "cyclegan";
  std::string eval_stage = "raw";

  try {
    sim_opts.seed = default_seed();
    train_opts.config.base_seed = default_seed();
    eval_opts.seed = default_seed();
  } catch (const emt::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  auto* sim = app.add_subcommand("simulate", "Generate synthetic datasets");
  sim->add_option("--preset", sim_opts.preset, "Bundled scenario set (table1)");
  sim->add_option("--spec", sim_opts.spec_path, "Simulation spec JSON");
  sim->add_option("--out", sim_opts.out_dir, "Output directory")->required();
  sim->add_option("--seed", sim_opts.seed, "Master seed (default: EMTCOMP_SEED or 0)")
      ->capture_default_str();

  auto* train = app.add_subcommand("train", "Train a compensation ensemble");
  train->add_option("--data", train_opts.data_dir, "Dataset directory")->required();
  train->add_option("--out", train_opts.out_path, "Ensemble output file")->required();
  train->add_option("--members", train_opts.config.member_count, "Ensemble size")
      ->capture_default_str();
  train->add_option("--seed", train_opts.config.base_seed,
                    "Base seed; member k trains with seed base+k")
      ->capture_default_str();
  train->add_option("--mode", train_mode, "cyclegan or vanilla-gan")
      ->capture_default_str();
  train->add_option("--lab-env", train_opts.config.base.lab_env_id,
                    "env_id of the laboratory-domain datasets")
      ->capture_default_str();
  train->add_option("--jobs", train_opts.config.jobs, "Parallel member training")
      ->capture_default_str();
  train->add_flag("--no-finetune", [&](std::int64_t) { train_opts.finetune = false; },
                  "Skip the linear fine-tune fit");
  train->add_flag("--quiet", train_opts.quiet, "Suppress per-epoch logging");
  add_schedule_flags(train, train_opts.config.base.schedule);
  add_weight_flags(train, train_opts.config.base.weights);

  auto* ev = app.add_subcommand("evaluate", "Evaluate compensation quality");
  ev->add_option("--data", eval_opts.data_dir, "Dataset directory")->required();
  ev->add_option("--ensemble", eval_opts.ensemble_path, "Trained ensemble file");
  ev->add_option("--stage", eval_stage, "raw, cyclegan or cyclegan-ft")
      ->capture_default_str();
  ev->add_flag("--ablation", eval_opts.ablation,
               "Train and compare raw/vanilla-GAN/CycleGAN/CycleGAN+FT/ANN arms");
  ev->add_option("--out-json", eval_opts.out_json, "Report JSON path")
      ->capture_default_str();
  ev->add_option("--out-table", eval_opts.out_table, "Report text table path")
      ->capture_default_str();
  ev->add_flag("--consistency", eval_opts.consistency,
               "Add the cross-environment z-spread metric");
  ev->add_option("--trajectory-csv", eval_opts.trajectory_csv,
                 "Write the rotation sanity series to this CSV");
  ev->add_option("--trajectory-env", eval_opts.trajectory_env,
                 "Environment for the trajectory check (default: first evaluation env)");
  ev->add_option("--svg", eval_opts.svg_dir, "Write per-environment scatter SVGs here");
  ev->add_option("--members", eval_opts.members, "Ensemble size per ablation arm")
      ->capture_default_str();
  ev->add_option("--seed", eval_opts.seed, "Master seed for ablation arms")
      ->capture_default_str();
  ev->add_option("--jobs", eval_opts.jobs, "Parallel member training")
      ->capture_default_str();
  ev->add_option("--lab-env", eval_opts.gan_base.lab_env_id,
                 "env_id of the laboratory-domain datasets")
      ->capture_default_str();
  add_schedule_flags(ev, eval_opts.gan_base.schedule);
  add_weight_flags(ev, eval_opts.gan_base.weights);

  auto* comp = app.add_subcommand(
      "compensate", "Stream filter: compensate newline-delimited points");
  comp->add_option("--ensemble", compensate_ensemble, "Trained ensemble file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return emt::cmd_simulate(sim_opts, std::cout);
    }
    if (train->parsed()) {
      if (train_mode == "vanilla-gan" || train_mode == "vanilla_gan") {
        train_opts.config.base.mode = emt::GanMode::vanilla_gan;
      } else if (train_mode == "cyclegan") {
        train_opts.config.base.mode = emt::GanMode::cyclegan;
      } else {
        throw emt::ConfigError("unknown mode: '" + train_mode + "'");
      }
      return emt::cmd_train(train_opts, std::cout);
    }
    if (ev->parsed()) {
      std::string stage = eval_stage;
      for (auto& c : stage) {
        if (c == '-') c = '_';
      }
      eval_opts.stage = emt::stage_from_string(stage);
      eval_opts.gan_base.seed = eval_opts.seed;
      return emt::cmd_evaluate(eval_opts, std::cout);
    }
    if (comp->parsed()) {
      return emt::cmd_compensate(compensate_ensemble, std::cin, std::cout, std::cerr);
    }
  } catch (const emt::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const emt::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const emt::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
