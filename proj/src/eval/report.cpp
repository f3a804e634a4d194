#include "cyclone/eval/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "cyclone/error.hpp"

namespace cyclone::eval {

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string one_decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Non-blank, non-comment lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> lines_of(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t n = 0;
  while (!text.empty()) {
    ++n;
    const std::size_t nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    out.emplace_back(n, line);
  }
  return out;
}

bool parse_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

bool valid_lead(int lead) { return lead >= 6 && lead <= 120 && lead % 6 == 0; }

bool valid_basin(std::string_view b) {
  try {
    data::parse_basin(b);
    return true;
  } catch (const Error&) {
    return false;
  }
}

int basin_rank(const std::string& b) {
  constexpr std::string_view order[] = {"WP", "NA", "EP", "SI", "SP"};
  for (int i = 0; i < 5; ++i)
    if (order[i] == b) return i;
  return 5;
}

// Validates one candidate row; returns an empty string when acceptable.
std::string check_row(const std::string& basin, const std::string& variable, int lead, double value) {
  if (!valid_basin(basin)) return "unknown basin '" + basin + "'";
  if (!known_variable(variable)) return "unknown variable '" + variable + "'";
  if (!valid_lead(lead)) return "unsupported lead " + std::to_string(lead) + " h";
  if (value < 0.0) return "negative mean absolute error " + shortest(value);
  return {};
}

void add_ingested(IngestResult& result, ReportRow row, std::size_t line) {
  for (auto& existing : result.rows) {
    if (existing.same_key(row)) {
      result.warnings.push_back("line " + std::to_string(line) + ": duplicate " + row.basin + "/" +
                                row.model + "/" + row.variable + "/" + std::to_string(row.lead) +
                                "h replaces earlier value " + shortest(existing.mae));
      existing = std::move(row);
      return;
    }
  }
  result.rows.push_back(std::move(row));
}

}  // namespace

bool EvalReport::upsert(ReportRow row) {
  for (auto& r : rows) {
    if (r.same_key(row)) {
      r = std::move(row);
      return true;
    }
  }
  rows.push_back(std::move(row));
  return false;
}

void EvalReport::merge(std::span<const ReportRow> more) {
  for (const auto& r : more) upsert(r);
}

std::vector<ReportRow> summarize(std::span<const Scored> scored) {
  using Key = std::tuple<std::string, std::string, std::string, int, int>;
  std::map<Key, std::pair<double, std::size_t>> sums;
  for (const auto& s : scored) {
    for (int year : {kAllYears, s.year}) {
      auto& cell = sums[{s.basin, s.model, s.variable, s.lead, year}];
      cell.first += s.error;
      ++cell.second;
    }
  }
  std::vector<ReportRow> out;
  for (const auto& [key, cell] : sums) {
    const auto& [basin, model, variable, lead, year] = key;
    out.push_back({basin, model, variable, lead, year, cell.first / double(cell.second), cell.second,
                   std::string(unit_of(variable))});
  }
  return out;
}

std::vector<ReportRow> aggregate(std::span<const ReportRow> rows, const GroupBy& keys) {
  std::vector<ReportRow> out;
  std::vector<double> weighted;
  for (const auto& r : rows) {
    require(r.count > 0, Errc::contract, [&] {
      return "cannot aggregate " + r.model + "/" + r.variable + " without a sample count";
    });
    ReportRow key{keys.basin ? r.basin : "all",
                  keys.model ? r.model : "all",
                  keys.variable ? r.variable : "all",
                  keys.lead ? r.lead : 0,
                  keys.year ? r.year : kAllYears,
                  0.0, 0, r.unit};
    auto it = std::find_if(out.begin(), out.end(), [&](const ReportRow& o) { return o.same_key(key); });
    if (it == out.end()) {
      out.push_back(key);
      weighted.push_back(0.0);
      it = out.end() - 1;
    }
    require(it->unit == r.unit, Errc::contract,
            [&] { return "cannot mix units " + it->unit + " and " + r.unit + " in one group"; });
    weighted[std::size_t(it - out.begin())] += r.mae * double(r.count);
    it->count += r.count;
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].mae = weighted[i] / double(out[i].count);
  return out;
}

std::string table_csv(const EvalReport& report) {
  std::vector<std::pair<std::string, std::string>> order;  // (basin, model)
  for (const auto& r : report.rows) {
    if (r.year != kAllYears) continue;
    const std::pair key{r.basin, r.model};
    if (std::find(order.begin(), order.end(), key) == order.end()) order.push_back(key);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    const int ra = basin_rank(a.first), rb = basin_rank(b.first);
    return ra != rb ? ra < rb : (ra == 5 && a.first < b.first);
  });

  std::string out = "basin,model";
  for (const char* v : {"MSW", "MSLP"})
    for (int lead : kScalarTableLeads) out += std::string(",") + v + "_" + std::to_string(lead) + "h";
  for (int lead : kTrackTableLeads) out += ",Track_" + std::to_string(lead) + "h";
  out += '\n';

  auto cell = [&](const std::string& basin, const std::string& model, const char* v, int lead) {
    for (const auto& r : report.rows)
      if (r.year == kAllYears && r.basin == basin && r.model == model && r.variable == v && r.lead == lead)
        return one_decimal(r.mae);
    return std::string();
  };
  for (const auto& [basin, model] : order) {
    out += basin + "," + model;
    for (const char* v : {"MSW", "MSLP"})
      for (int lead : kScalarTableLeads) out += "," + cell(basin, model, v, lead);
    for (int lead : kTrackTableLeads) out += "," + cell(basin, model, "Track", lead);
    out += '\n';
  }
  return out;
}

std::string long_csv(const EvalReport& report) {
  std::string out = "basin,model,variable,lead,year,mae,count\n";
  for (const auto& r : report.rows) {
    out += r.basin + "," + r.model + "," + r.variable + "," + std::to_string(r.lead) + "," +
           (r.year == kAllYears ? std::string("all") : std::to_string(r.year)) + "," + shortest(r.mae) +
           "," + (r.count > 0 ? std::to_string(r.count) : std::string()) + "\n";
  }
  return out;
}

IngestResult ingest_baselines(std::string_view csv) {
  IngestResult result;
  const auto lines = lines_of(csv);
  require(!lines.empty(), Errc::io, "baselines file is empty");
  const auto header = split(lines[0].second);
  require(header == std::vector<std::string_view>{"model", "basin", "variable", "lead", "mae"},
          Errc::io, "baselines header must be model,basin,variable,lead,mae");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [n, line] = lines[i];
    const auto f = split(line);
    const std::string where = "line " + std::to_string(n) + ": ";
    if (f.size() != 5) {
      result.rejected.push_back(where + "expected 5 fields, got " + std::to_string(f.size()));
      continue;
    }
    int lead = 0;
    double value = 0.0;
    if (!parse_int(f[3], lead)) {
      result.rejected.push_back(where + "lead '" + std::string(f[3]) + "' is not an integer");
      continue;
    }
    if (!parse_number(f[4], value)) {
      result.rejected.push_back(where + "mae '" + std::string(f[4]) + "' is not a number");
      continue;
    }
    ReportRow row{std::string(f[1]), std::string(f[0]), std::string(f[2]), lead, kAllYears, value, 0, ""};
    if (row.model.empty()) {
      result.rejected.push_back(where + "empty model name");
      continue;
    }
    if (const std::string why = check_row(row.basin, row.variable, lead, value); !why.empty()) {
      result.rejected.push_back(where + why);
      continue;
    }
    row.unit = std::string(unit_of(row.variable));
    add_ingested(result, std::move(row), n);
  }
  return result;
}

IngestResult ingest_table(std::string_view csv) {
  IngestResult result;
  const auto lines = lines_of(csv);
  require(!lines.empty(), Errc::io, "table file is empty");
  const auto header = split(lines[0].second);
  require(header.size() >= 2 && header[0] == "basin" && header[1] == "model", Errc::io,
          "table header must start with basin,model");
  std::vector<std::pair<std::string, int>> columns;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const std::string_view h = header[c];
    const std::size_t us = h.find('_');
    int lead = 0;
    require(us != h.npos && h.size() > us + 2 && h.back() == 'h' &&
                parse_int(h.substr(us + 1, h.size() - us - 2), lead),
            Errc::io, [&] { return "bad table column '" + std::string(h) + "'"; });
    columns.emplace_back(std::string(h.substr(0, us)), lead);
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [n, line] = lines[i];
    const auto f = split(line);
    const std::string where = "line " + std::to_string(n) + ": ";
    if (f.size() != header.size()) {
      result.rejected.push_back(where + "expected " + std::to_string(header.size()) + " fields");
      continue;
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string_view text = f[c + 2];
      if (text.empty()) continue;
      double value = 0.0;
      if (!parse_number(text, value)) {
        result.rejected.push_back(where + "cell '" + std::string(text) + "' is not a number");
        continue;
      }
      const auto& [variable, lead] = columns[c];
      if (const std::string why = check_row(std::string(f[0]), variable, lead, value); !why.empty()) {
        result.rejected.push_back(where + why);
        continue;
      }
      add_ingested(result,
                   {std::string(f[0]), std::string(f[1]), variable, lead, kAllYears, value, 0,
                    std::string(unit_of(variable))},
                   n);
    }
  }
  return result;
}

}  // namespace cyclone::eval
