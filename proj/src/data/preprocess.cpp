#include "cyclone/data/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "cyclone/error.hpp"

namespace cyclone::data {

namespace {

std::size_t channels_of(const ad::Tensor& t) {
  require(t.rank() >= 1 && t.size() > 0, Errc::dimension, "expected a non-empty channel-last tensor");
  return t.shape().back();
}

std::vector<double> channel_means(const ad::Tensor& t) {
  const std::size_t c = channels_of(t);
  const std::size_t n = t.size() / c;
  std::vector<double> mean(c, 0.0);
  auto v = t.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) mean[k] += v[i * c + k];
  }
  for (double& m : mean) m /= double(n);
  return mean;
}

// Two-pass population statistics accumulated over many tensors.
class StatsAccumulator {
 public:
  explicit StatsAccumulator(std::size_t channels) : sum_(channels, 0.0), sq_(channels, 0.0) {}

  void add_mean(std::span<const double> values) {
    const std::size_t c = sum_.size();
    for (std::size_t i = 0; i < values.size(); ++i) sum_[i % c] += values[i];
    count_ += values.size() / c;
  }

  void finish_mean() {
    mean_ = sum_;
    for (double& m : mean_) m /= double(count_);
  }

  void add_var(std::span<const double> values) {
    const std::size_t c = sum_.size();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = values[i] - mean_[i % c];
      sq_[i % c] += d * d;
    }
  }

  ChannelStats finish(std::string_view what, std::span<const std::string_view> names) const {
    ChannelStats out{mean_, std::vector<double>(sq_.size())};
    for (std::size_t k = 0; k < sq_.size(); ++k) {
      out.stddev[k] = std::sqrt(sq_[k] / double(count_));
      require(out.stddev[k] > 0.0, Errc::degenerate,
              [&] { return std::string(what) + " channel '" +
                  (k < names.size() ? std::string(names[k]) : std::to_string(k)) +
                  "' has zero standard deviation"; });
    }
    return out;
  }

  std::size_t count() const { return count_; }

 private:
  std::vector<double> sum_, sq_, mean_;
  std::size_t count_ = 0;
};

constexpr std::array<std::string_view, 4> kAttNames{"msw", "mslp", "lat", "lon"};

nlohmann::json stats_json(const ChannelStats& s) {
  return {{"mean", s.mean}, {"std", s.stddev}};
}

ChannelStats stats_from(const nlohmann::json& j, std::size_t expected, std::string_view what) {
  ChannelStats s{j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
  require(s.mean.size() == expected && s.stddev.size() == expected, Errc::config,
          [&] { return std::string(what) + " statistics have the wrong channel count"; });
  for (double sd : s.stddev) require(sd > 0.0, Errc::degenerate, [&] { return std::string(what) + " has zero std"; });
  return s;
}

template <typename T>
std::vector<Timed<T>> upsample_impl(std::span<const Timed<T>> series) {
  std::vector<Timed<T>> out;
  if (series.empty()) return out;
  out.reserve(series.size() * 2 - 1);
  out.push_back(series[0]);
  for (std::size_t i = 1; i < series.size(); ++i) {
    const auto gap = hours_between(series[i - 1].time, series[i].time);
    require(gap == 12, Errc::alignment,
            [&] { return "expected 12-hourly input but found " + std::to_string(gap) + " h between " +
                format_iso8601(series[i - 1].time) + " and " + format_iso8601(series[i].time); });
    T mid = series[i - 1].value;
    if constexpr (std::is_same_v<T, double>) {
      mid = 0.5 * (series[i - 1].value + series[i].value);
    } else {
      require(series[i].value.shape() == mid.shape(), Errc::dimension, "tensor shapes differ in series");
      auto a = series[i].value.values();
      auto m = mid.values();
      for (std::size_t k = 0; k < m.size(); ++k) m[k] = 0.5 * (m[k] + a[k]);
    }
    out.push_back({series[i - 1].time + kStep, std::move(mid)});
    out.push_back(series[i]);
  }
  return out;
}

const TCSample* find_sample(const CycloneRecord& r, TimePoint t) {
  auto it = std::lower_bound(r.samples.begin(), r.samples.end(), t,
                             [](const TCSample& s, TimePoint v) { return s.time < v; });
  return it != r.samples.end() && it->time == t ? &*it : nullptr;
}

const TrackPoint* find_point(const CycloneRecord& r, TimePoint t) {
  auto it = std::lower_bound(r.track.points.begin(), r.track.points.end(), t,
                             [](const TrackPoint& p, TimePoint v) { return p.time < v; });
  return it != r.track.points.end() && it->time == t ? &*it : nullptr;
}

}  // namespace

double bilinear_sample(const ad::Tensor& field, std::size_t channel, double row, double col,
                       double fill) {
  require(field.rank() == 3, Errc::dimension, "bilinear_sample expects [H x W x C]");
  const std::size_t h = field.dim(0), w = field.dim(1), c = field.dim(2);
  require(channel < c, Errc::dimension, "channel index out of range");
  constexpr double kTol = 1e-9;
  if (!(row >= -kTol && col >= -kTol && row <= double(h - 1) + kTol && col <= double(w - 1) + kTol)) {
    return fill;
  }
  row = std::clamp(row, 0.0, double(h - 1));
  col = std::clamp(col, 0.0, double(w - 1));
  const std::size_t r0 = std::min<std::size_t>(std::size_t(row), h > 1 ? h - 2 : 0);
  const std::size_t c0 = std::min<std::size_t>(std::size_t(col), w > 1 ? w - 2 : 0);
  const std::size_t r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
  const double fr = row - double(r0), fc = col - double(c0);
  auto v = field.values();
  auto at = [&](std::size_t r, std::size_t cc) { return v[(r * w + cc) * c + channel]; };
  const double top = (1.0 - fc) * at(r0, c0) + fc * at(r0, c1);
  const double bottom = (1.0 - fc) * at(r1, c0) + fc * at(r1, c1);
  return (1.0 - fr) * top + fr * bottom;
}

ad::Tensor center_crop_resample(const GeoField& field, GeoPoint center, double extent_deg,
                                std::size_t out_h, std::size_t out_w) {
  require(extent_deg > 0.0, Errc::contract, "crop extent must be positive");
  require(out_h > 0 && out_w > 0, Errc::contract, "output size must be positive");
  require(field.values.rank() == 3, Errc::dimension, "field must be [H x W x C]");
  require(field.dlat != 0.0 && field.dlon != 0.0, Errc::contract, "grid spacing must be non-zero");
  const std::size_t c = field.values.dim(2);
  const std::vector<double> fill = channel_means(field.values);

  ad::Tensor out({out_h, out_w, c});
  auto o = out.values();
  const double res_y = extent_deg / double(out_h);
  const double res_x = extent_deg / double(out_w);
  for (std::size_t i = 0; i < out_h; ++i) {
    const double lat = center.lat + extent_deg / 2.0 - (double(i) + 0.5) * res_y;
    const double row = (lat - field.lat0) / field.dlat;
    for (std::size_t j = 0; j < out_w; ++j) {
      double lon = center.lon - extent_deg / 2.0 + (double(j) + 0.5) * res_x;
      double col = (lon - field.lon0) / field.dlon;
      // Try the equivalent longitude one turn away when the grid crosses the dateline.
      const double turn = 360.0 / std::abs(field.dlon);
      const double wmax = double(field.values.dim(1) - 1);
      if (col < 0.0 && col + turn <= wmax) col += turn;
      if (col > wmax && col - turn >= 0.0) col -= turn;
      for (std::size_t k = 0; k < c; ++k) {
        o[(i * out_w + j) * c + k] = bilinear_sample(field.values, k, row, col, fill[k]);
      }
    }
  }
  return out;
}

nlohmann::json NormStats::to_json() const {
  return {{"sat", stats_json(sat)}, {"era5", stats_json(era5)}, {"att", stats_json(att)}};
}

NormStats NormStats::from_json(const nlohmann::json& j) {
  return {stats_from(j.at("sat"), kSatChannelCount, "sat"),
          stats_from(j.at("era5"), kEra5ChannelCount, "era5"),
          stats_from(j.at("att"), kAttCount, "att")};
}

NormStats fit_stats(std::span<const TCSample> samples) {
  require(!samples.empty(), Errc::degenerate, "cannot fit normalization on an empty set");
  StatsAccumulator sat(kSatChannelCount), era5(kEra5ChannelCount), att(kAttCount);
  for (const auto& s : samples) {
    require(channels_of(s.sat) == kSatChannelCount && channels_of(s.era5) == kEra5ChannelCount,
            Errc::dimension, "sample channel counts do not match the schema");
    sat.add_mean(s.sat.values());
    era5.add_mean(s.era5.values());
    att.add_mean(s.att);
  }
  sat.finish_mean();
  era5.finish_mean();
  att.finish_mean();
  for (const auto& s : samples) {
    sat.add_var(s.sat.values());
    era5.add_var(s.era5.values());
    att.add_var(s.att);
  }
  return {sat.finish("sat", kSatChannels), era5.finish("era5", kEra5Channels),
          att.finish("att", kAttNames)};
}

NormStats fit_stats(std::span<const CycloneRecord> records) {
  std::vector<TCSample> flat;
  for (const auto& r : records) flat.insert(flat.end(), r.samples.begin(), r.samples.end());
  return fit_stats(std::span<const TCSample>(flat));
}

void zscore_inplace(ad::Tensor& x, const ChannelStats& stats) {
  const std::size_t c = channels_of(x);
  require(c == stats.mean.size(), Errc::dimension, "channel count does not match statistics");
  auto v = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t k = i % c;
    v[i] = (v[i] - stats.mean[k]) / stats.stddev[k];
  }
}

void unzscore_inplace(ad::Tensor& x, const ChannelStats& stats) {
  const std::size_t c = channels_of(x);
  require(c == stats.mean.size(), Errc::dimension, "channel count does not match statistics");
  auto v = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t k = i % c;
    v[i] = v[i] * stats.stddev[k] + stats.mean[k];
  }
}

double zscore_value(double v, const ChannelStats& stats, std::size_t channel) {
  return (v - stats.mean.at(channel)) / stats.stddev.at(channel);
}

double unzscore_value(double z, const ChannelStats& stats, std::size_t channel) {
  return z * stats.stddev.at(channel) + stats.mean.at(channel);
}

TCSample zscore(const TCSample& sample, const NormStats& stats) {
  TCSample out = sample;
  zscore_inplace(out.sat, stats.sat);
  zscore_inplace(out.era5, stats.era5);
  for (std::size_t k = 0; k < kAttCount; ++k) out.att[k] = zscore_value(sample.att[k], stats.att, k);
  return out;
}

TCSample unzscore(const TCSample& sample, const NormStats& stats) {
  TCSample out = sample;
  unzscore_inplace(out.sat, stats.sat);
  unzscore_inplace(out.era5, stats.era5);
  for (std::size_t k = 0; k < kAttCount; ++k) out.att[k] = unzscore_value(sample.att[k], stats.att, k);
  return out;
}

std::vector<Timed<double>> upsample_12h_to_6h(std::span<const Timed<double>> series) {
  return upsample_impl(series);
}

std::vector<Timed<ad::Tensor>> upsample_12h_to_6h(std::span<const Timed<ad::Tensor>> series) {
  return upsample_impl(series);
}

Window build_window(const CycloneRecord& record, TimePoint t0, std::span<const int> leads) {
  Window w;
  w.t0 = t0;
  for (std::size_t k = 0; k < kWindowSteps; ++k) {
    const TimePoint t = t0 - kStep * std::int64_t(kWindowSteps - 1 - k);
    const TCSample* s = find_sample(record, t);
    require(s != nullptr, Errc::gap,
            [&] { return "cyclone " + record.track.id + " has no sample at " + format_iso8601(t); });
    w.inputs[k] = s;
  }
  for (int lead : leads) {
    require(lead > 0 && lead % 6 == 0, Errc::contract, "lead must be a positive multiple of 6 h");
    const TimePoint t = t0 + std::chrono::hours(lead);
    const TrackPoint* p = find_point(record, t);
    require(p != nullptr, Errc::gap,
            [&] { return "cyclone " + record.track.id + " has no best-track target at " + format_iso8601(t) +
                " (lead " + std::to_string(lead) + " h)"; });
    w.targets.emplace(lead, *p);
  }
  return w;
}

int max_available_lead_hours(const CycloneRecord& record, TimePoint t0) {
  int lead = 0;
  while (lead < kMaxLeadHours && find_point(record, t0 + std::chrono::hours(lead + 6)) != nullptr) {
    lead += 6;
  }
  return lead;
}

std::vector<TimePoint> forecast_origins(const CycloneRecord& record, std::span<const int> leads) {
  std::vector<TimePoint> out;
  const int need = leads.empty() ? 0 : *std::max_element(leads.begin(), leads.end());
  for (const auto& s : record.samples) {
    bool ok = true;
    for (std::size_t k = 1; k < kWindowSteps && ok; ++k) {
      ok = find_sample(record, s.time - kStep * std::int64_t(k)) != nullptr;
    }
    if (ok && max_available_lead_hours(record, s.time) >= need) out.push_back(s.time);
  }
  return out;
}

std::vector<int> all_leads() {
  std::vector<int> leads;
  for (int h = 6; h <= kMaxLeadHours; h += 6) leads.push_back(h);
  return leads;
}

}  // namespace cyclone::data
