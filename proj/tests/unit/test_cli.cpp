#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "cyclone/cli/commands.hpp"
#include "cyclone/error.hpp"

using namespace cyclone;
using namespace cyclone::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "cyclonekit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh scratch directory per test, removed on exit.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name)
      : dir(fs::temp_directory_path() / ("cyclonekit_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

// Smallest configuration that exercises every stage.
std::string mini_config(const fs::path& out, const std::string& extra_finetune = "") {
  return "seed = 5\nout = \"" + out.string() + "\"\n" + R"(
[data]
cyclones = 6
test_cyclones = 3
min_steps = 25
max_steps = 26
sat_hw = 16
era5_hw = 16

[model]
sat_patch = 4
era5_patch = 4
encoder_depth = 1
encoder_heads = 2
encoder_dim = 8
encoder_mlp = 16
decoder_depth = 1
decoder_heads = 2
decoder_dim = 8
decoder_mlp = 16
cond_hidden = 8

[pretrain]
epochs = 2

[finetune]
epochs = 3
batch_size = 8
hidden = 8
head_hidden_scalar = 8
head_hidden_track = 8
bins = 16
track_bins = 8
)" + extra_finetune + R"(
[attribution]
steps = 4
windows = 1
)";
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.toml";
  std::ofstream(p) << text;
  return p;
}

template <typename Fn>
std::string config_error(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    CHECK(e.code() == Errc::config);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("config defaults apply to every key not given") {
  const RunConfig c = parse_config("seed = 3\n");
  CHECK(c.seed == 3u);
  CHECK(c.out == "run");
  CHECK(c.data.cyclones == 20);
  CHECK(c.mask.gamma_env == 0.75);
  CHECK(c.finetune.leads == std::vector<int>{6, 24, 48, 72, 96, 120});
  CHECK(c.finetune.track_leads == std::vector<int>{6, 24, 48, 72});
  CHECK(c.finetune.head_hidden_scalar == 256);
  CHECK(c.finetune.head_hidden_track == 64);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config values of every type parse") {
  const RunConfig c = parse_config(R"(
seed = 9   # trailing comment
out = "runs/a#b"
[data]
noise = 0.125
basins = ["WP", "SI"]
[pretrain]
resample_masks = false
[finetune]
leads = [6, 24]
[eval]
quantiles = [0.1, 0.9]
)");
  CHECK(c.out == "runs/a#b");
  CHECK(c.data.noise == 0.125);
  CHECK(c.data.basins == std::vector<std::string>{"WP", "SI"});
  CHECK_FALSE(c.pretrain.resample_masks);
  CHECK(c.finetune.leads == std::vector<int>{6, 24});
  CHECK(c.quantile_pairs() == std::vector<std::pair<double, double>>{{0.1, 0.9}});
}

TEST_CASE("unknown keys, sections and bad values name the line") {
  CHECK(config_error([] { parse_config("seed = 1\n[data]\ncyclone = 4\n"); }).find("line 3") != std::string::npos);
  CHECK(config_error([] { parse_config("seed = 1\n[datum]\n"); }).find("unknown section") != std::string::npos);
  CHECK(config_error([] { parse_config("[data]\ncyclones = \"many\"\n"); }).find("line 2") != std::string::npos);
  CHECK(config_error([] { parse_config("[pretrain]\nresample_masks = 1\n"); }).find("true or false") !=
        std::string::npos);
  CHECK(config_error([] { parse_config("seed = 1\nseed = 2\n"); }).find("twice") != std::string::npos);
  CHECK(config_error([] { parse_config("seed = 1\nnot a pair\n"); }).find("line 2") != std::string::npos);
}

TEST_CASE("seed is mandatory") {
  const RunConfig c = parse_config("[data]\ncyclones = 4\n");
  CHECK(config_error([&] { c.validate(); }).find("seed") != std::string::npos);
}

TEST_CASE("validation rejects inconsistent settings") {
  CHECK_THROWS_AS(parse_config("seed = 1\n[finetune]\nvariables = [\"Wind\"]\n").validate(), Error);
  CHECK_THROWS_AS(parse_config("seed = 1\n[eval]\nquantiles = [0.9, 0.1]\n").validate(), Error);
  CHECK_THROWS_AS(parse_config("seed = 1\n[model]\nsat_patch = 7\n").validate(), Error);
  CHECK_THROWS_AS(parse_config("seed = 1\n[attribution]\nsteps = 1\n").validate(), Error);
}

TEST_CASE("effective config parses back to itself") {
  RunConfig c = parse_config("seed = 77\n[data]\nbasins = [\"NA\"]\nnoise = 1e-3\n[eval]\nbaselines = [\"b.csv\"]\n");
  const std::string echo = effective_config(c);
  CHECK(effective_config(parse_config(echo)) == echo);
  CHECK(echo.find("seed = 77") != std::string::npos);
  CHECK(echo.find("noise = 0.001") != std::string::npos);
}

TEST_CASE("shipped configs load and validate") {
  for (const char* name : {"toy.toml", "full_scale.toml"}) {
    CAPTURE(name);
    const RunConfig c = load_config(fs::path(CYCLONE_SOURCE_DIR) / "configs" / name);
    CHECK_NOTHROW(c.validate());
    CHECK(c.mae_config().sat_grid().count() == c.mae_config().era5_grid().count());
  }
}

TEST_CASE("missing upstream artifacts ask for the stage to run") {
  Scratch s("missing");
  const fs::path cfg = write_config(s.dir, mini_config(s.dir / "out"));
  for (const auto& [command, stage] : std::vector<std::pair<std::string, std::string>>{
           {"pretrain", "synth"}, {"finetune", "pretrain"}, {"predict", "synth"}, {"attribute", "synth"},
           {"evaluate", "predict"}}) {
    const Outcome o = run({command, "--config", cfg.string()});
    CHECK(o.code != 0);
    CHECK(o.err.rfind("cyclonekit: error: missing_artifact: ", 0) == 0);
    CHECK(o.err.find("run " + stage + " first") != std::string::npos);
    CHECK(std::count(o.err.begin(), o.err.end(), '\n') == 1);
  }
}

TEST_CASE("usage and config errors are one line") {
  Scratch s("usage");
  Outcome o = run({"synth"});
  CHECK(o.code != 0);
  CHECK(o.err.rfind("cyclonekit: error: usage: ", 0) == 0);
  o = run({"synth", "--config", (s.dir / "nope.toml").string()});
  CHECK(o.err.rfind("cyclonekit: error: io: ", 0) == 0);
  const fs::path bad = write_config(s.dir, "seed = 1\n[data]\nsize = 3\n");
  o = run({"synth", "--config", bad.string()});
  CHECK(o.err.rfind("cyclonekit: error: config: line 3", 0) == 0);
  CHECK(std::count(o.err.begin(), o.err.end(), '\n') == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("synth reruns with one seed are byte-identical; flags override the config") {
  Scratch s("synth");
  const fs::path cfg = write_config(s.dir, mini_config(s.dir / "unused"));
  REQUIRE(run({"synth", "--config", cfg.string(), "--out", (s.dir / "a").string()}).code == 0);
  CHECK_FALSE(fs::exists(s.dir / "unused"));
  const auto a = tree_bytes(s.dir / "a");
  CHECK(a.size() > 10);
  REQUIRE(run({"synth", "--config", cfg.string(), "--out", (s.dir / "a").string()}).code == 0);
  CHECK(a == tree_bytes(s.dir / "a"));
  CHECK(a.count("data/effective_config.toml") == 1);

  REQUIRE(run({"synth", "--config", cfg.string(), "--out", (s.dir / "c").string(), "--seed", "6"}).code == 0);
  CHECK(slurp(s.dir / "c/data/train/SYN0000/track.csv") != slurp(s.dir / "a/data/train/SYN0000/track.csv"));
  CHECK(slurp(s.dir / "c/data/effective_config.toml").find("seed = 6") != std::string::npos);
}

TEST_CASE("evaluate with baseline CSVs alone still emits the table") {
  Scratch s("baselines");
  const std::string extra = std::string("\n[eval]\nbaselines = [\"") + CYCLONE_FIXTURE_DIR + "/si_sp_baselines.csv\"]\n";
  const fs::path cfg = write_config(s.dir, mini_config(s.dir / "out") + extra);
  const Outcome o = run({"evaluate", "--config", cfg.string()});
  REQUIRE(o.code == 0);
  const std::string table = slurp(s.dir / "out/eval/table.csv");
  CHECK(table.rfind("basin,model,MSW_6h", 0) == 0);
  CHECK(table.find("SI,cyclonekit,3.4,4.7,4.8") != std::string::npos);
}

// Independent oracle: persistence errors computed straight from the held-out
// track.csv files must match the report, and every in-range origin and lead
// must carry exactly one forecast.
TEST_CASE("mini pipeline runs end to end and matches a persistence oracle") {
  Scratch s("pipeline");
  const fs::path cfg = write_config(s.dir, mini_config(s.dir / "out", "shared_trunk = true\n"));
  for (const char* stage : {"synth", "pretrain", "finetune", "predict", "evaluate", "attribute"}) {
    const Outcome o = run({stage, "--config", cfg.string()});
    INFO(stage << ": " << o.err);
    REQUIRE(o.code == 0);
  }
  const fs::path out = s.dir / "out";
  for (const char* f : {"pretrain/mae_best.json", "pretrain/mae_final.json", "pretrain/pretrain_loss.csv",
                        "pretrain/norm_stats.json", "finetune/MSW/models.json", "finetune/Track/shared/model.json",
                        "eval/table.csv", "eval/long.csv", "attribution/attribution_MSLP.csv",
                        "eval/effective_config.toml"}) {
    CHECK_MESSAGE(fs::exists(out / f), f);
  }

  // Parse the held-out best tracks by hand.
  std::map<std::string, std::vector<std::array<double, 4>>> tracks;  // lat, lon, msw, mslp
  for (const auto& e : fs::directory_iterator(out / "data/test")) {
    if (!e.is_directory()) continue;
    std::istringstream in(slurp(e.path() / "track.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::array<double, 4> v{};
      std::istringstream fields(line.substr(line.find(',') + 1));
      char comma;
      fields >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3];
      tracks[e.path().filename().string()].push_back(v);
    }
  }
  REQUIRE(tracks.size() == 3);

  std::size_t expected_lines = 0;
  double msw6_sum = 0.0;
  std::size_t msw6_n = 0;
  for (const auto& [id, pts] : tracks) {
    for (std::size_t t0 = 4; t0 < pts.size(); ++t0) {
      for (int lead : {6, 24, 48, 72, 96, 120}) expected_lines += 2 * (t0 + lead / 6 < pts.size());
      for (int lead : {6, 24, 48, 72}) expected_lines += (t0 + lead / 6 < pts.size());
      if (t0 + 1 < pts.size()) {
        msw6_sum += std::abs(pts[t0 + 1][2] - pts[t0][2]);
        ++msw6_n;
      }
    }
  }
  const std::string jsonl = slurp(out / "predict/predictions.jsonl");
  CHECK(std::size_t(std::count(jsonl.begin(), jsonl.end(), '\n')) == expected_lines);

  // Pool the per-basin all-years persistence rows by count.
  std::istringstream long_csv(slurp(out / "eval/long.csv"));
  std::string line;
  double pooled = 0.0;
  std::size_t pooled_n = 0;
  while (std::getline(long_csv, line)) {
    if (line.find(",Persistence,MSW,6,all,") == std::string::npos) continue;
    const auto mae_at = line.find(",all,") + 5;
    const double mae = std::stod(line.substr(mae_at));
    const std::size_t count = std::stoul(line.substr(line.rfind(',') + 1));
    pooled += mae * double(count);
    pooled_n += count;
  }
  REQUIRE(msw6_n > 0);
  CHECK(pooled_n == msw6_n);
  // Only the summation order differs.
  CHECK(pooled / double(pooled_n) == doctest::Approx(msw6_sum / double(msw6_n)).epsilon(1e-9));

  const std::string attribution = slurp(out / "attribution/attribution_MSW.csv");
  CHECK(attribution.find("variable,lead,predictor,group,relative_weight") != std::string::npos);
}
