// uptrack — synthetic template-update laboratory for Siamese-style trackers.
//
// Subcommands: gen, train, track, eval, analyze. A single JSON config drives
// every command; --seed reshuffles all derived randomness. Exit codes:
// 0 success, 2 usage / bad arguments, 1 anything else.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uptrack/uptrack.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

uptrack::ExperimentConfig load_config(const CommonArgs& args, bool required) {
  const std::uint64_t* ov = args.seed_set ? &args.seed : nullptr;
  if (args.config_path.empty()) {
    if (required) throw uptrack::usage_error("--config is required for this command");
    return uptrack::experiment_from_json(nlohmann::json::object(), ov);
  }
  return uptrack::load_experiment_config(args.config_path, ov);
}

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* opt = cmd->add_option("--config", args.config_path, "experiment config JSON");
  if (config_required) opt->required();
  cmd->add_option("--seed", args.seed, "override the global seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic template-update laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", uptrack::kToolVersion);

  CommonArgs args;

  auto* gen = app.add_subcommand("gen", "render the configured scenes to disk");
  std::string gen_out;
  add_common(gen, args, true);
  gen->add_option("--out", gen_out, "output directory")->required();

  auto* train = app.add_subcommand("train", "collect tuples and train update networks");
  std::string train_data, train_out;
  int train_stages = 0;
  add_common(train, args, true);
  train->add_option("--data", train_data, "directory of generated sequences")->required();
  train->add_option("--stages", train_stages, "number of training stages (overrides config)");
  train->add_option("--out", train_out, "output directory")->required();

  auto* track = app.add_subcommand("track", "run the tracker over sequences");
  std::string track_data, track_out, track_strategy;
  bool track_dump = false;
  add_common(track, args, true);
  track->add_option("--data", track_data, "directory of generated sequences")->required();
  track
      ->add_option("--strategy", track_strategy,
                   std::string("update strategy; ") + uptrack::kStrategyGrammar)
      ->required();
  track->add_flag("--dump-templates", track_dump,
                  "write per-frame accumulated templates and top-channel images");
  track->add_option("--out", track_out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "score tracking runs into a report");
  std::string eval_protocol, eval_in, eval_out;
  add_common(eval, args, false);
  eval->add_option("--protocol", eval_protocol, "ope or vot")->required();
  eval->add_option("--in", eval_in, "tracking output directory (single run or parent)")
      ->required();
  eval->add_option("--out", eval_out, "report path (.json; .csv written alongside)")->required();

  auto* analyze = app.add_subcommand("analyze", "template-dynamics analyses");
  std::string analyze_kind, analyze_out;
  std::vector<std::string> analyze_in;
  add_common(analyze, args, false);
  analyze->add_option("--kind", analyze_kind, "change-rate, channels, or gamma-sweep")
      ->required();
  analyze->add_option("--in", analyze_in, "input directory (repeatable for change-rate)")
      ->required();
  analyze->add_option("--out", analyze_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      uptrack::cmd_gen(load_config(args, true), gen_out);
    } else if (train->parsed()) {
      uptrack::cmd_train(load_config(args, true), train_data, train_stages, train_out);
    } else if (track->parsed()) {
      uptrack::cmd_track(load_config(args, true), track_data, track_strategy, track_dump,
                         track_out);
    } else if (eval->parsed()) {
      uptrack::cmd_eval(load_config(args, false), eval_protocol, eval_in, eval_out);
    } else if (analyze->parsed()) {
      std::vector<std::filesystem::path> ins(analyze_in.begin(), analyze_in.end());
      uptrack::cmd_analyze(load_config(args, false), analyze_kind, ins, analyze_out);
    }
  } catch (const uptrack::usage_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
