#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "cyclone/cli/config.hpp"

namespace cyclone::cli {

// Output layout under RunConfig::out.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path train_data() const { return root / "data" / "train"; }
  std::filesystem::path test_data() const { return root / "data" / "test"; }
  std::filesystem::path pretrain() const { return root / "pretrain"; }
  std::filesystem::path encoder() const { return pretrain() / "mae_best.json"; }
  std::filesystem::path norm_stats() const { return pretrain() / "norm_stats.json"; }
  std::filesystem::path finetune(std::string_view variable) const {
    return root / "finetune" / std::string(variable);
  }
  std::filesystem::path models(std::string_view variable) const { return finetune(variable) / "models.json"; }
  std::filesystem::path predictions() const { return root / "predict" / "predictions.jsonl"; }
  std::filesystem::path eval() const { return root / "eval"; }
  std::filesystem::path attribution() const { return root / "attribution"; }
};

// Each stage validates the config, echoes it as effective_config.toml into
// its output directory and reports progress on `log`. A missing upstream
// artifact is a missing-artifact error saying which stage to run.

// data/train and data/test.
void run_synth(const RunConfig& config, std::ostream& log);
// pretrain/: norm_stats.json, mae_best.json, mae_final.json, pretrain_loss.csv.
void run_pretrain(const RunConfig& config, std::ostream& log);
// finetune/<VAR>/: one model per lead (or one shared model), its loss
// history and models.json. Jobs run on up to CYCLONEKIT_THREADS threads.
void run_finetune(const RunConfig& config, std::ostream& log);
// predict/predictions.jsonl: one line per (cyclone, t0, variable, lead) for
// every held-out origin whose lead lies inside the best track.
void run_predict(const RunConfig& config, std::ostream& log);
// eval/table.csv and eval/long.csv from predictions, persistence and any
// baseline CSVs. Runs with baselines alone when nothing was predicted.
void run_evaluate(const RunConfig& config, std::ostream& log);
// attribution/attribution_<VAR>.csv pooled over held-out origins.
void run_attribute(const RunConfig& config, std::ostream& log);

// cyclonekit <command> --config PATH [--seed N] [--out DIR]. Returns the
// process exit code; failures print one line
//   cyclonekit: error: <kind>: <message>
// to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cyclone::cli
