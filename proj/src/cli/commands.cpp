#include "cyclone/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cyclone/attribution/ig.hpp"
#include "cyclone/autodiff/checkpoint.hpp"
#include "cyclone/data/dataset_io.hpp"
#include "cyclone/error.hpp"
#include "cyclone/eval/report.hpp"
#include "cyclone/rng.hpp"
#include "cyclone/threads.hpp"

namespace cyclone::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  require(out.good(), Errc::io, [&] { return "cannot write " + path.string(); });
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::io, [&] { return "cannot read " + path.string(); });
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void need(const fs::path& path, std::string_view stage) {
  require(fs::exists(path), Errc::missing_artifact,
          [&] { return path.string() + " not found; run " + std::string(stage) + " first"; });
}

void echo_config(const RunConfig& config, const fs::path& dir) {
  write_text(dir / "effective_config.toml", effective_config(config));
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string encoder_hash(const Layout& layout) {
  return hex(ad::file_hash(ad::blob_path(layout.encoder())));
}

std::vector<forecast::Variable> variables(const RunConfig& config) {
  std::vector<forecast::Variable> out;
  for (const auto& name : config.finetune.variables) out.push_back(forecast::parse_variable(name));
  return out;
}

data::NormStats load_stats(const Layout& layout) {
  need(layout.norm_stats(), "pretrain");
  return data::NormStats::from_json(json::parse(read_text(layout.norm_stats())));
}

std::unique_ptr<mae::MaskedAutoencoder> load_encoder(const Layout& layout) {
  need(layout.encoder(), "pretrain");
  return mae::MaskedAutoencoder::load(layout.encoder());
}

std::vector<data::CycloneRecord> load_split(const fs::path& dir) {
  need(dir / "dataset.json", "synth");
  return data::read_dataset(dir);
}

// Fine-tuned models of one variable, in manifest order, with their leads.
struct LoadedModels {
  std::vector<std::unique_ptr<forecast::ForecastModel>> models;
};

LoadedModels load_models(const Layout& layout, forecast::Variable v) {
  const std::string name(forecast::variable_name(v));
  need(layout.models(name), "finetune");
  const json manifest = json::parse(read_text(layout.models(name)));
  require(manifest.at("encoder_hash").get<std::string>() == encoder_hash(layout), Errc::contract,
          [&] { return name + " models were fine-tuned on a different encoder; run finetune first"; });
  LoadedModels out;
  for (const auto& entry : manifest.at("models")) {
    const fs::path path = layout.finetune(name) / entry.at("path").get<std::string>();
    need(path, "finetune");
    out.models.push_back(forecast::ForecastModel::load(path));
  }
  return out;
}

// Runs jobs on up to worker_threads() threads; the first failure in job
// order is rethrown after all jobs stop.
void run_jobs(std::size_t count, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(worker_threads(), count);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Error lines must stay on one line.
std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

json interval_json(std::span<const forecast::Interval> intervals) {
  json out = json::array();
  for (const auto& iv : intervals) out.push_back({{"q_lo", iv.q_lo}, {"q_hi", iv.q_hi}, {"lo", iv.lo}, {"hi", iv.hi}});
  return out;
}

}  // namespace

void run_synth(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Layout layout{config.root()};
  const std::uint64_t seed = config.require_seed();
  const auto geometry = config.synth_config(1).geometry;

  auto train = data::synth_dataset(config.synth_config(config.data.cyclones), derive_seed(seed, 1));
  auto test = data::synth_dataset(config.synth_config(config.data.test_cyclones), derive_seed(seed, 2));
  // Distinct ids so held-out storms can never be mistaken for training ones.
  for (std::size_t i = 0; i < test.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "TEST%04zu", i);
    test[i].track.id = id;
  }
  fs::remove_all(layout.root / "data");
  data::write_dataset(layout.train_data(), train, geometry, {{"split", "train"}, {"seed", seed}});
  data::write_dataset(layout.test_data(), test, geometry, {{"split", "test"}, {"seed", seed}});
  echo_config(config, layout.root / "data");
  log << "synth: " << train.size() << " training and " << test.size() << " held-out cyclones in "
      << (layout.root / "data").string() << "\n";
}

void run_pretrain(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Layout layout{config.root()};
  const std::uint64_t seed = config.require_seed();
  const auto train = load_split(layout.train_data());

  const data::NormStats stats = data::fit_stats(std::span<const data::CycloneRecord>(train));
  fs::create_directories(layout.pretrain());
  write_text(layout.norm_stats(), stats.to_json().dump(2) + "\n");

  mae::MaskedAutoencoder model(config.mae_config(), derive_seed(seed, 3));
  const auto samples = mae::make_pretrain_samples(train, stats, model.config());
  mae::PretrainOutputs outputs;
  outputs.dir = layout.pretrain();
  outputs.on_epoch = [&](std::size_t epoch, double loss) {
    log << "pretrain: epoch " << epoch + 1 << "/" << config.pretrain.epochs << " loss " << loss << "\n";
  };
  const auto result = mae::pretrain(model, samples, config.pretrain_config(), derive_seed(seed, 4), outputs);
  echo_config(config, layout.pretrain());
  log << "pretrain: best epoch " << result.best_epoch << " loss " << result.best_loss << "\n";
}

void run_finetune(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Layout layout{config.root()};
  const std::uint64_t seed = config.require_seed();
  const data::NormStats stats = load_stats(layout);
  need(layout.encoder(), "pretrain");
  const std::string enc_hash = encoder_hash(layout);

  auto train = load_split(layout.train_data());
  if (config.finetune.basin != "all") {
    const auto basin = data::parse_basin(config.finetune.basin);
    std::erase_if(train, [&](const data::CycloneRecord& r) { return r.track.basin != basin; });
    require(train.size() >= 2, Errc::degenerate,
            [&] { return "basin " + config.finetune.basin + " has fewer than 2 training cyclones"; });
  }

  struct Job {
    forecast::Variable v;
    std::vector<int> leads;
    std::string subdir;
  };
  std::vector<Job> jobs;
  for (const auto v : variables(config)) {
    const auto leads = config.leads_for(v);
    if (config.finetune.shared_trunk) {
      jobs.push_back({v, leads, "shared"});
    } else {
      for (int lead : leads) jobs.push_back({v, {lead}, "lead_" + std::to_string(lead)});
    }
  }

  std::vector<std::string> logs(jobs.size());
  run_jobs(jobs.size(), [&](std::size_t i) {
    const Job& job = jobs[i];
    const std::string name(forecast::variable_name(job.v));
    const fs::path dir = layout.finetune(name) / job.subdir;
    // Each job owns its encoder copy; fine-tuning toggles its trainable flags.
    auto encoder = load_encoder(layout);
    const std::uint64_t job_seed =
        derive_seed(seed, 10 + std::uint64_t(job.v), job.leads.size() == 1 ? std::uint64_t(job.leads[0]) : 0);
    forecast::FinetuneResult result;
    const auto model = forecast::finetune(*encoder, train, stats, config.finetune_config(job.v, job.leads),
                                          job_seed, &result);
    json meta = {{"encoder_hash", enc_hash},
                 {"leads", job.leads},
                 {"best_epoch", result.best_epoch},
                 {"validation_ids", result.validation_ids}};
    fs::create_directories(dir);
    model->save(dir / "model.json", meta);
    std::string csv = "epoch,train_loss,val_loss,learning_rate\n";
    char line[128];
    for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
      std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", e, result.train_loss[e], result.val_loss[e],
                    result.learning_rate[e]);
      csv += line;
    }
    write_text(dir / "finetune_loss.csv", csv);
    std::ostringstream msg;
    msg << "finetune: " << name << " " << job.subdir << " best epoch " << result.best_epoch << " val loss "
        << result.val_loss[result.best_epoch - 1] << "\n";
    logs[i] = msg.str();
  });
  for (const auto& l : logs) log << l;

  for (const auto v : variables(config)) {
    const std::string name(forecast::variable_name(v));
    json manifest = {{"variable", name}, {"encoder_hash", enc_hash}, {"models", json::array()}};
    for (const auto& job : jobs) {
      if (job.v == v) manifest["models"].push_back({{"leads", job.leads}, {"path", job.subdir + "/model.json"}});
    }
    write_text(layout.models(name), manifest.dump(2) + "\n");
  }
  echo_config(config, layout.root / "finetune");
}

void run_predict(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Layout layout{config.root()};
  const auto test = load_split(layout.test_data());
  const data::NormStats stats = load_stats(layout);
  const auto encoder = load_encoder(layout);
  const auto quantiles = config.quantile_pairs();

  std::string lines;
  std::size_t count = 0;
  for (const auto v : variables(config)) {
    const std::string name(forecast::variable_name(v));
    const auto loaded = load_models(layout, v);
    const auto features = forecast::featurize(*encoder, test, stats, v);
    for (std::size_t c = 0; c < test.size(); ++c) {
      const auto& record = test[c];
      const auto& pts = record.track.points;
      for (std::size_t t0 = forecast::kWindow - 1; t0 < record.samples.size(); ++t0) {
        const auto window = forecast::window_features(features, {c, t0, {}, {}});
        for (const auto& model : loaded.models) {
          for (const auto& f : model->predict(window, pts[t0].lat, pts[t0].lon, quantiles)) {
            if (t0 + std::size_t(f.lead / 6) >= pts.size()) continue;
            json j = {{"cyclone", record.track.id},
                      {"basin", data::basin_name(record.track.basin)},
                      {"t0", format_iso8601(pts[t0].time)},
                      {"variable", name},
                      {"lead", f.lead}};
            if (v == forecast::Variable::track) {
              j["lat"] = f.lat;
              j["lon"] = f.lon;
              j["clamped"] = f.clamped;
              j["probs_lat"] = f.probs;
              j["probs_lon"] = f.probs_lon;
              j["intervals_lat"] = interval_json(f.intervals);
              j["intervals_lon"] = interval_json(f.intervals_lon);
            } else {
              j["value"] = f.value;
              j["probs"] = f.probs;
              j["intervals"] = interval_json(f.intervals);
            }
            lines += j.dump() + "\n";
            ++count;
          }
        }
      }
    }
  }
  write_text(layout.predictions(), lines);
  echo_config(config, layout.predictions().parent_path());
  log << "predict: " << count << " forecasts in " << layout.predictions().string() << "\n";
}

void run_evaluate(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Layout layout{config.root()};
  const bool have_predictions = fs::exists(layout.predictions());
  require(have_predictions || !config.eval.baselines.empty(), Errc::missing_artifact, [&] {
    return layout.predictions().string() + " not found and no eval.baselines given; run predict first";
  });

  eval::EvalReport report;
  std::vector<data::CycloneRecord> test;
  if (have_predictions || (config.eval.persistence && fs::exists(layout.test_data() / "dataset.json"))) {
    test = load_split(layout.test_data());
  }
  if (have_predictions) {
    std::vector<eval::Prediction> predictions;
    std::istringstream in(read_text(layout.predictions()));
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        eval::Prediction p;
        p.cyclone = j.at("cyclone").get<std::string>();
        p.t0 = parse_iso8601(j.at("t0").get<std::string>());
        p.variable = j.at("variable").get<std::string>();
        p.lead = j.at("lead").get<int>();
        if (p.variable == "Track") {
          p.lat = j.at("lat").get<double>();
          p.lon = j.at("lon").get<double>();
        } else {
          p.value = j.at("value").get<double>();
        }
        predictions.push_back(std::move(p));
      } catch (const json::exception& e) {
        fail(Errc::io, layout.predictions().string() + " line " + std::to_string(number) + ": " + e.what());
      }
    }
    report.merge(eval::summarize(eval::score_predictions(predictions, test, "cyclonekit")));
  }
  if (config.eval.persistence && !test.empty()) {
    for (const auto v : variables(config)) {
      const auto leads = config.leads_for(v);
      report.merge(eval::summarize(eval::persistence_scores(test, forecast::variable_name(v), leads)));
    }
  }
  for (const auto& path : config.eval.baselines) {
    require(fs::exists(path), Errc::io, [&] { return "baseline file " + path + " not found"; });
    const auto ingested = eval::ingest_baselines(read_text(path));
    for (const auto& r : ingested.rejected) log << "evaluate: warning: " << path << ": " << r << "\n";
    for (const auto& w : ingested.warnings) log << "evaluate: warning: " << path << ": " << w << "\n";
    report.merge(ingested.rows);
  }

  write_text(layout.eval() / "table.csv", eval::table_csv(report));
  write_text(layout.eval() / "long.csv", eval::long_csv(report));
  echo_config(config, layout.eval());
  log << "evaluate: " << report.rows.size() << " rows in " << layout.eval().string() << "\n";
}

void run_attribute(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Layout layout{config.root()};
  const auto test = load_split(layout.test_data());
  const data::NormStats stats = load_stats(layout);
  const auto encoder = load_encoder(layout);
  attribution::AttributionConfig ig;
  ig.steps = config.attribution.steps;

  // Evenly spaced origins over all held-out windows.
  std::vector<std::pair<std::size_t, std::size_t>> origins;
  for (std::size_t c = 0; c < test.size(); ++c) {
    for (std::size_t t0 = forecast::kWindow - 1; t0 < test[c].samples.size(); ++t0) origins.emplace_back(c, t0);
  }
  require(!origins.empty(), Errc::insufficient_length, "no held-out cyclone has a complete 5-step window");
  const std::size_t n = std::min(config.attribution.windows, origins.size());
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  for (std::size_t k = 0; k < n; ++k) chosen.push_back(origins[k * origins.size() / n]);

  for (const auto v : variables(config)) {
    const std::string name(forecast::variable_name(v));
    const auto loaded = load_models(layout, v);
    std::map<int, attribution::HeadAttribution> pooled;
    for (const auto& [c, t0] : chosen) {
      const auto input = attribution::window_input(test[c], t0, stats, v);
      for (const auto& model : loaded.models) {
        for (const auto& head : attribution::attribute(*encoder, *model, input, ig)) {
          auto [it, fresh] = pooled.try_emplace(head.lead, head);
          if (fresh) continue;
          auto& acc = it->second;
          for (std::size_t i = 0; i < acc.masses.size(); ++i) acc.masses[i].mass += head.masses[i].mass;
          if (head.residual > acc.residual) {
            acc.residual = head.residual;
            acc.delta = head.delta;
          }
        }
      }
    }
    std::vector<attribution::HeadAttribution> heads;
    for (auto& [lead, head] : pooled) {
      head.weights = attribution::group_and_normalize(head.masses);
      log << "attribute: " << name << " " << lead << "h worst completeness residual " << head.residual
          << " of |F(x)-F(x')| " << head.delta << "\n";
      heads.push_back(std::move(head));
    }
    write_text(layout.attribution() / ("attribution_" + name + ".csv"),
               attribution::attribution_csv(name, heads, ig.steps));
  }
  echo_config(config, layout.attribution());
  log << "attribute: pooled " << n << " held-out windows\n";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cyclone forecasting pipeline: synth, pretrain, finetune, predict, evaluate, attribute"};
  app.name("cyclonekit");
  app.require_subcommand(1, 1);
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  app.add_option("--config", config_path, "TOML config file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "overrides the config seed");
  auto* out_opt = app.add_option("--out", out_dir, "overrides the config output root");
  app.fallthrough();

  using Stage = void (*)(const RunConfig&, std::ostream&);
  const std::pair<const char*, Stage> stages[] = {
      {"synth", run_synth},       {"pretrain", run_pretrain}, {"finetune", run_finetune},
      {"predict", run_predict},   {"evaluate", run_evaluate}, {"attribute", run_attribute},
  };
  for (const auto& [name, stage] : stages) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "cyclonekit: error: usage: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    RunConfig config = load_config(config_path);
    if (seed_opt->count() > 0) config.seed = seed;
    if (out_opt->count() > 0) config.out = out_dir;
    for (const auto& [name, stage] : stages) {
      if (app.got_subcommand(name)) stage(config, out);
    }
    return 0;
  } catch (const Error& e) {
    err << "cyclonekit: error: " << errc_name(e.code()) << ": " << one_line(e.what()) << "\n";
  } catch (const std::exception& e) {
    err << "cyclonekit: error: internal: " << one_line(e.what()) << "\n";
  }
  return 1;
}

}  // namespace cyclone::cli
