#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cyclone/eval/metrics.hpp"

namespace cyclone::eval {

inline constexpr int kAllYears = 0;

struct ReportRow {
  std::string basin;
  std::string model;
  std::string variable;
  int lead = 0;
  int year = kAllYears;
  double mae = 0.0;
  std::size_t count = 0;  // 0 for externally supplied rows
  std::string unit;

  bool same_key(const ReportRow& o) const {
    return basin == o.basin && model == o.model && variable == o.variable && lead == o.lead &&
           year == o.year;
  }
};

// Rows in insertion order; a row whose key already exists replaces it.
struct EvalReport {
  std::vector<ReportRow> rows;

  // Returns true when an existing row was replaced.
  bool upsert(ReportRow row);
  void merge(std::span<const ReportRow> more);
};

// Per (basin, model, variable, lead) means, both per year and over all years.
std::vector<ReportRow> summarize(std::span<const Scored> scored);

// Regroup keeping only the selected key fields; dropped fields become "all"
// (strings) or 0 (lead, year). Count-weighted means. Mixed units within a
// group, or rows without counts, are a contract error.
struct GroupBy {
  bool basin = true;
  bool model = true;
  bool variable = true;
  bool lead = true;
  bool year = true;
};
std::vector<ReportRow> aggregate(std::span<const ReportRow> rows, const GroupBy& keys);

// Fixed comparison-table columns.
inline constexpr int kScalarTableLeads[] = {6, 24, 48, 72, 96, 120};
inline constexpr int kTrackTableLeads[] = {6, 24, 48, 72};

// basin,model,MSW_6h..MSW_120h,MSLP_6h..MSLP_120h,Track_6h..Track_72h with
// one decimal; all-years rows only. Basins in WP, NA, EP, SI, SP order,
// models in order of first appearance.
std::string table_csv(const EvalReport& report);

// basin,model,variable,lead,year,mae,count for every row; year "all" for the
// all-years rows.
std::string long_csv(const EvalReport& report);

struct IngestResult {
  std::vector<ReportRow> rows;
  std::vector<std::string> rejected;  // one message per rejected line
  std::vector<std::string> warnings;  // duplicate keys (last wins)
};

// model,basin,variable,lead,mae
IngestResult ingest_baselines(std::string_view csv);
// The table_csv layout; empty cells are skipped.
IngestResult ingest_table(std::string_view csv);

}  // namespace cyclone::eval
