#include "cyclone/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <variant>

#include "cyclone/error.hpp"
#include "cyclone/grid/bins.hpp"
#include "cyclone/mask/radial.hpp"

namespace cyclone::cli {

namespace {

using Field = std::variant<std::optional<std::uint64_t>*, std::size_t*, double*, bool*, std::string*,
                           std::vector<int>*, std::vector<double>*, std::vector<std::string>*>;

struct Entry {
  std::string_view key;  // "section.name", or "name" at top level
  Field field;
};

std::vector<Entry> schema(RunConfig& c) {
  return {
      {"seed", &c.seed},
      {"out", &c.out},
      {"data.cyclones", &c.data.cyclones},
      {"data.test_cyclones", &c.data.test_cyclones},
      {"data.min_steps", &c.data.min_steps},
      {"data.max_steps", &c.data.max_steps},
      {"data.noise", &c.data.noise},
      {"data.obs_noise", &c.data.obs_noise},
      {"data.basins", &c.data.basins},
      {"data.sat_hw", &c.data.sat_hw},
      {"data.era5_hw", &c.data.era5_hw},
      {"data.sat_extent_deg", &c.data.sat_extent_deg},
      {"data.era5_extent_deg", &c.data.era5_extent_deg},
      {"mask.r_eye", &c.mask.r_eye},
      {"mask.r_outer", &c.mask.r_outer},
      {"mask.gamma_core", &c.mask.gamma_core},
      {"mask.gamma_wall", &c.mask.gamma_wall},
      {"mask.gamma_env", &c.mask.gamma_env},
      {"model.sat_patch", &c.model.sat_patch},
      {"model.era5_patch", &c.model.era5_patch},
      {"model.encoder_depth", &c.model.encoder_depth},
      {"model.encoder_heads", &c.model.encoder_heads},
      {"model.encoder_dim", &c.model.encoder_dim},
      {"model.encoder_mlp", &c.model.encoder_mlp},
      {"model.decoder_depth", &c.model.decoder_depth},
      {"model.decoder_heads", &c.model.decoder_heads},
      {"model.decoder_dim", &c.model.decoder_dim},
      {"model.decoder_mlp", &c.model.decoder_mlp},
      {"model.cond_hidden", &c.model.cond_hidden},
      {"model.init_std", &c.model.init_std},
      {"pretrain.epochs", &c.pretrain.epochs},
      {"pretrain.batch_size", &c.pretrain.batch_size},
      {"pretrain.learning_rate", &c.pretrain.learning_rate},
      {"pretrain.resample_masks", &c.pretrain.resample_masks},
      {"finetune.variables", &c.finetune.variables},
      {"finetune.leads", &c.finetune.leads},
      {"finetune.track_leads", &c.finetune.track_leads},
      {"finetune.basin", &c.finetune.basin},
      {"finetune.shared_trunk", &c.finetune.shared_trunk},
      {"finetune.epochs", &c.finetune.epochs},
      {"finetune.batch_size", &c.finetune.batch_size},
      {"finetune.learning_rate", &c.finetune.learning_rate},
      {"finetune.plateau_factor", &c.finetune.plateau_factor},
      {"finetune.plateau_patience", &c.finetune.plateau_patience},
      {"finetune.val_fraction", &c.finetune.val_fraction},
      {"finetune.hidden", &c.finetune.hidden},
      {"finetune.layers", &c.finetune.layers},
      {"finetune.head_hidden_scalar", &c.finetune.head_hidden_scalar},
      {"finetune.head_hidden_track", &c.finetune.head_hidden_track},
      {"finetune.bins", &c.finetune.bins},
      {"finetune.track_bins", &c.finetune.track_bins},
      {"finetune.sigma_bins", &c.finetune.sigma_bins},
      {"eval.quantiles", &c.eval.quantiles},
      {"eval.baselines", &c.eval.baselines},
      {"eval.persistence", &c.eval.persistence},
      {"attribution.steps", &c.attribution.steps},
      {"attribution.windows", &c.attribution.windows},
  };
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

struct Parser {
  std::size_t line = 0;
  std::string key;

  [[noreturn]] void bad(const std::string& what) const {
    fail(Errc::config, "line " + std::to_string(line) + ": " + key + ": " + what);
  }

  template <typename T>
  T integer(std::string_view s) const {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) bad("expected an integer, got '" + std::string(s) + "'");
    return v;
  }

  double real(std::string_view s) const {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v))
      bad("expected a number, got '" + std::string(s) + "'");
    return v;
  }

  std::string string(std::string_view s) const {
    if (s.size() < 2 || s.front() != '"' || s.back() != '"') bad("expected a quoted string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) ++i;
      out += s[i];
    }
    return out;
  }

  std::vector<std::string_view> items(std::string_view s) const {
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') bad("expected an array [..]");
    s = trim(s.substr(1, s.size() - 2));
    std::vector<std::string_view> out;
    if (s.empty()) return out;
    bool quoted = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i < s.size() && s[i] == '"') quoted = !quoted;
      if (i == s.size() || (s[i] == ',' && !quoted)) {
        const auto item = trim(s.substr(start, i - start));
        if (item.empty()) {
          if (i == s.size()) break;  // trailing comma
          bad("empty array element");
        }
        out.push_back(item);
        start = i + 1;
      }
    }
    return out;
  }

  void assign(const Field& field, std::string_view v) const {
    std::visit(
        [&](auto* target) {
          using T = std::remove_pointer_t<decltype(target)>;
          if constexpr (std::is_same_v<T, std::optional<std::uint64_t>>) {
            *target = integer<std::uint64_t>(v);
          } else if constexpr (std::is_same_v<T, std::size_t>) {
            *target = integer<std::size_t>(v);
          } else if constexpr (std::is_same_v<T, double>) {
            *target = real(v);
          } else if constexpr (std::is_same_v<T, bool>) {
            if (v != "true" && v != "false") bad("expected true or false");
            *target = v == "true";
          } else if constexpr (std::is_same_v<T, std::string>) {
            *target = string(v);
          } else if constexpr (std::is_same_v<T, std::vector<int>>) {
            target->clear();
            for (auto item : items(v)) target->push_back(integer<int>(item));
          } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            target->clear();
            for (auto item : items(v)) target->push_back(real(item));
          } else {
            target->clear();
            for (auto item : items(v)) target->push_back(string(item));
          }
        },
        field);
  }
};

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  // Keep floats recognisable as floats.
  if (s.find_first_of(".e") == std::string::npos && s.find("inf") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string format_field(const Field& field) {
  return std::visit(
      [](auto* target) -> std::string {
        using T = std::remove_pointer_t<decltype(target)>;
        if constexpr (std::is_same_v<T, std::optional<std::uint64_t>>) {
          return target->has_value() ? std::to_string(**target) : "\"\"";
        } else if constexpr (std::is_same_v<T, std::size_t>) {
          return std::to_string(*target);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(*target);
        } else if constexpr (std::is_same_v<T, bool>) {
          return *target ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return quote(*target);
        } else {
          std::string out = "[";
          for (std::size_t i = 0; i < target->size(); ++i) {
            if (i) out += ", ";
            const auto& x = (*target)[i];
            if constexpr (std::is_same_v<T, std::vector<int>>) out += std::to_string(x);
            else if constexpr (std::is_same_v<T, std::vector<double>>) out += format_double(x);
            else out += quote(x);
          }
          return out + "]";
        }
      },
      field);
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  const auto entries = schema(config);
  Parser p;
  std::string section;
  std::vector<std::string> seen;
  while (!text.empty()) {
    ++p.line;
    const std::size_t nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    p.key.clear();
    if (line.front() == '[') {
      if (line.back() != ']') p.bad("malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      const bool known = section == "data" || section == "mask" || section == "model" ||
                         section == "pretrain" || section == "finetune" || section == "eval" ||
                         section == "attribution";
      if (!known) p.bad("unknown section [" + section + "]");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) p.bad("expected key = value");
    const std::string name(trim(line.substr(0, eq)));
    p.key = section.empty() ? name : section + "." + name;
    const auto it = std::find_if(entries.begin(), entries.end(), [&](const Entry& e) { return e.key == p.key; });
    if (it == entries.end()) p.bad("unknown key");
    if (std::find(seen.begin(), seen.end(), p.key) != seen.end()) p.bad("key set twice");
    seen.push_back(p.key);
    p.assign(it->field, trim(line.substr(eq + 1)));
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io, [&] { return "cannot read config " + path.string(); });
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string effective_config(const RunConfig& config) {
  RunConfig copy = config;
  std::string out = "# effective configuration (defaults filled in)\n";
  std::string section;
  for (const auto& e : schema(copy)) {
    const std::size_t dot = e.key.find('.');
    const std::string sec = dot == std::string_view::npos ? "" : std::string(e.key.substr(0, dot));
    const std::string_view name = dot == std::string_view::npos ? e.key : e.key.substr(dot + 1);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += std::string(name) + " = " + format_field(e.field) + "\n";
  }
  return out;
}

std::uint64_t RunConfig::require_seed() const {
  require(seed.has_value(), Errc::config, "seed is mandatory (top-level 'seed = N' or --seed)");
  return *seed;
}

void RunConfig::validate() const {
  require_seed();
  auto check = [](bool ok, const char* what) { require(ok, Errc::config, what); };
  check(!out.empty(), "out must not be empty");
  check(data.cyclones >= 2, "data.cyclones must be at least 2");
  check(data.min_steps <= data.max_steps, "data.min_steps exceeds data.max_steps");
  check(data.min_steps >= 10, "data.min_steps must be at least 10");
  check(!data.basins.empty(), "data.basins must not be empty");
  for (const auto& b : data.basins) data::parse_basin(b);
  check(data.noise >= 0.0 && data.obs_noise >= 0.0, "noise levels must be non-negative");
  mask::RadialMaskPolicy{mask.r_eye, mask.r_outer, mask.gamma_core, mask.gamma_wall, mask.gamma_env}.validate();
  mae_config().validate();
  check(pretrain.epochs > 0 && pretrain.batch_size > 0, "pretrain.epochs and batch_size must be positive");
  check(pretrain.learning_rate >= 0.0, "pretrain.learning_rate must be non-negative");
  check(!finetune.variables.empty(), "finetune.variables must not be empty");
  for (const auto& v : finetune.variables) forecast::parse_variable(v);
  for (const auto& leads : {finetune.leads, finetune.track_leads}) {
    check(!leads.empty(), "lead lists must not be empty");
    for (int l : leads) grid::regime_for_lead(l);
  }
  if (finetune.basin != "all") data::parse_basin(finetune.basin);
  check(finetune.epochs > 0 && finetune.batch_size > 0, "finetune.epochs and batch_size must be positive");
  check(finetune.val_fraction >= 0.0 && finetune.val_fraction < 1.0, "finetune.val_fraction must be in [0, 1)");
  check(finetune.plateau_factor > 0.0 && finetune.plateau_factor <= 1.0, "finetune.plateau_factor must be in (0, 1]");
  check(finetune.hidden > 0 && finetune.layers > 0 && finetune.head_hidden_scalar > 0 &&
            finetune.head_hidden_track > 0,
        "finetune widths must be positive");
  check(finetune.bins >= 2 && finetune.track_bins >= 2, "bin counts must be at least 2");
  check(finetune.sigma_bins > 0.0, "finetune.sigma_bins must be positive");
  check(eval.quantiles.size() % 2 == 0, "eval.quantiles must hold (lo, hi) pairs");
  for (std::size_t i = 0; i + 1 < eval.quantiles.size(); i += 2) {
    check(0.0 <= eval.quantiles[i] && eval.quantiles[i] <= eval.quantiles[i + 1] && eval.quantiles[i + 1] <= 1.0,
          "each eval.quantiles pair needs 0 <= lo <= hi <= 1");
  }
  check(attribution.steps >= 2, "attribution.steps must be at least 2");
  check(attribution.windows >= 1, "attribution.windows must be at least 1");
}

data::SynthDatasetConfig RunConfig::synth_config(std::size_t cyclones) const {
  data::SynthDatasetConfig s;
  s.cyclones = cyclones;
  s.min_steps = data.min_steps;
  s.max_steps = data.max_steps;
  s.noise = data.noise;
  s.obs_noise = data.obs_noise;
  s.basins.clear();
  for (const auto& b : data.basins) s.basins.push_back(data::parse_basin(b));
  s.geometry = {data.sat_hw, data.era5_hw, data.sat_extent_deg, data.era5_extent_deg};
  return s;
}

mae::MaeConfig RunConfig::mae_config() const {
  mae::MaeConfig m;
  m.sat_hw = data.sat_hw;
  m.era5_hw = data.era5_hw;
  m.sat_patch = model.sat_patch;
  m.era5_patch = model.era5_patch;
  m.sat_encoder = {model.encoder_depth, model.encoder_heads, model.encoder_dim, model.encoder_mlp};
  m.era5_encoder = m.sat_encoder;
  m.decoder = {model.decoder_depth, model.decoder_heads, model.decoder_dim, model.decoder_mlp};
  m.cond_hidden = model.cond_hidden;
  m.init_std = model.init_std;
  return m;
}

mae::PretrainConfig RunConfig::pretrain_config() const {
  mae::PretrainConfig p;
  p.epochs = pretrain.epochs;
  p.batch_size = pretrain.batch_size;
  p.learning_rate = pretrain.learning_rate;
  p.resample_masks = pretrain.resample_masks;
  p.mask = {mask.r_eye, mask.r_outer, mask.gamma_core, mask.gamma_wall, mask.gamma_env};
  return p;
}

std::vector<int> RunConfig::leads_for(forecast::Variable v) const {
  return v == forecast::Variable::track ? finetune.track_leads : finetune.leads;
}

forecast::FinetuneConfig RunConfig::finetune_config(forecast::Variable v, std::vector<int> leads) const {
  forecast::FinetuneConfig f;
  f.arch.variable = v;
  f.arch.hidden = finetune.hidden;
  f.arch.layers = finetune.layers;
  f.arch.head_hidden = v == forecast::Variable::track ? finetune.head_hidden_track : finetune.head_hidden_scalar;
  f.arch.sigma_bins = finetune.sigma_bins;
  f.leads = std::move(leads);
  f.epochs = finetune.epochs;
  f.batch_size = finetune.batch_size;
  f.learning_rate = finetune.learning_rate;
  f.plateau_factor = finetune.plateau_factor;
  f.plateau_patience = finetune.plateau_patience;
  f.val_fraction = finetune.val_fraction;
  f.bins = finetune.bins;
  f.track_bins = finetune.track_bins;
  return f;
}

std::vector<std::pair<double, double>> RunConfig::quantile_pairs() const {
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i + 1 < eval.quantiles.size(); i += 2) out.emplace_back(eval.quantiles[i], eval.quantiles[i + 1]);
  return out;
}

}  // namespace cyclone::cli
