#include "cyclone/forecast/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "cyclone/autodiff/ops.hpp"
#include "cyclone/autodiff/optim.hpp"
#include "cyclone/error.hpp"
#include "cyclone/rng.hpp"

namespace cyclone::forecast {

using ad::Tensor;
using ad::Var;

std::optional<double> scalar_target(const data::CycloneRecord& r, std::size_t t0, Variable v,
                                    int lead) {
  const std::size_t t = t0 + std::size_t(lead / 6);
  if (t >= r.track.points.size()) return std::nullopt;
  return v == Variable::msw ? r.track.points[t].msw : r.track.points[t].mslp;
}

std::optional<std::pair<double, double>> track_target(const data::CycloneRecord& r, std::size_t t0,
                                                      int lead) {
  const std::size_t t = t0 + std::size_t(lead / 6);
  if (t >= r.track.points.size()) return std::nullopt;
  const auto& a = r.track.points[t0];
  const auto& b = r.track.points[t];
  return std::pair{b.lat - a.lat, data::wrap_longitude(b.lon - a.lon)};
}

std::vector<WindowRef> collect_windows(std::span<const data::CycloneRecord> records, Variable v,
                                       std::span<const int> leads) {
  std::vector<WindowRef> out;
  for (std::size_t c = 0; c < records.size(); ++c) {
    const auto& r = records[c];
    for (std::size_t t0 = kWindow - 1; t0 < r.samples.size(); ++t0) {
      WindowRef w{c, t0, {}, {}};
      bool any = false;
      for (int lead : leads) {
        if (v == Variable::track) {
          w.track.push_back(track_target(r, t0, lead));
          any = any || w.track.back().has_value();
        } else {
          w.scalar.push_back(scalar_target(r, t0, v, lead));
          any = any || w.scalar.back().has_value();
        }
      }
      if (any) out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<Tensor> window_features(const FeatureTable& features, const WindowRef& w) {
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < kWindow; ++k) out.push_back(features.rows[w.cyclone][w.t0 + 1 + k - kWindow]);
  return out;
}

namespace {

// Smoothed targets per (window, head); empty tensor when the lead is absent.
using Labels = std::vector<std::vector<Tensor>>;

Labels make_labels(const ForecastModel& model, std::span<const WindowRef> windows) {
  const auto& heads = model.heads();
  const Variable v = model.arch().variable;
  const double sb = model.arch().sigma_bins;
  Labels labels(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (std::size_t h = 0; h < heads.size(); ++h) {
      Tensor q;
      if (v == Variable::track) {
        if (const auto& t = windows[i].track[h]) {
          const auto& spec = heads[h].track;
          auto lat = grid::smooth_labels(t->first, spec.lat, sb * spec.lat.width());
          const auto lon = grid::smooth_labels(t->second, spec.lon, sb * spec.lon.width());
          lat.insert(lat.end(), lon.begin(), lon.end());
          const std::size_t width = lat.size();
          q = Tensor({1, width}, std::move(lat));
        }
      } else if (const auto& y = windows[i].scalar[h]) {
        const auto& spec = heads[h].scalar;
        q = Tensor({1, spec.k}, grid::smooth_labels(*y, spec, sb * spec.width()));
      }
      labels[i].push_back(std::move(q));
    }
  }
  return labels;
}

// Summed loss of a batch; the graph holds everything needed for backward.
Var batch_loss(ad::Graph& g, const ForecastModel& model, const FeatureTable& features,
               std::span<const WindowRef> windows, const Labels& labels,
               std::span<const std::size_t> batch) {
  const std::size_t f = features.width;
  const std::size_t b = batch.size();
  std::vector<Var> steps;
  for (std::size_t k = 0; k < kWindow; ++k) {
    Tensor x({b, f});
    for (std::size_t r = 0; r < b; ++r) {
      const WindowRef& w = windows[batch[r]];
      const Tensor& row = features.rows[w.cyclone][w.t0 + 1 + k - kWindow];
      std::copy(row.values().begin(), row.values().end(), x.values().begin() + r * f);
    }
    steps.push_back(g.constant(std::move(x)));
  }
  const auto logits = model.forward(g, steps);
  const auto& heads = model.heads();
  std::vector<Var> terms;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < b; ++r)
      if (!labels[batch[r]][h].empty()) rows.push_back(r);
    if (rows.empty()) continue;
    const std::size_t width = heads[h].width(model.arch().variable);
    Tensor q({rows.size(), width});
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const Tensor& src = labels[batch[rows[k]]][h];
      std::copy(src.values().begin(), src.values().end(), q.values().begin() + k * width);
    }
    Var z = rows.size() == b ? logits[h] : ad::gather_rows(logits[h], rows);
    if (model.arch().variable == Variable::track) {
      // Latitude and longitude softmaxes are independent halves of the head.
      const std::size_t m = heads[h].track.lat.k;
      const std::size_t mo = heads[h].track.lon.k;
      std::vector<double> lat, lon;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto row = q.values().begin() + std::ptrdiff_t(k * width);
        lat.insert(lat.end(), row, row + std::ptrdiff_t(m));
        lon.insert(lon.end(), row + std::ptrdiff_t(m), row + std::ptrdiff_t(width));
      }
      terms.push_back(ad::softmax_cross_entropy(ad::slice(z, 1, 0, m), Tensor({rows.size(), m}, std::move(lat))));
      terms.push_back(ad::softmax_cross_entropy(ad::slice(z, 1, m, mo), Tensor({rows.size(), mo}, std::move(lon))));
    } else {
      terms.push_back(ad::softmax_cross_entropy(z, q));
    }
  }
  require(!terms.empty(), Errc::contract, "batch has no targets");
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return total;
}

}  // namespace

double evaluate_loss(const ForecastModel& model, const FeatureTable& features,
                     std::span<const WindowRef> windows) {
  if (windows.empty()) return 0.0;
  const Labels labels = make_labels(model, windows);
  double total = 0.0;
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    std::vector<std::size_t> batch(std::min(kChunk, windows.size() - start));
    std::iota(batch.begin(), batch.end(), start);
    ad::Graph g(false);
    total += batch_loss(g, model, features, windows, labels, batch).value().item();
  }
  return total / double(windows.size());
}

void train_model(ForecastModel& model, const TrainingSet& set, const FinetuneConfig& config,
                 std::uint64_t seed, FinetuneResult& result,
                 const std::function<void(std::size_t, double, double)>& after_epoch) {
  require(set.features != nullptr && !set.train.empty(), Errc::insufficient_length,
          "no training windows for fine-tuning");
  require(config.batch_size > 0 && config.epochs > 0, Errc::config,
          "finetune epochs and batch_size must be positive");
  ad::ParamStore& store = model.params();
  ad::Adam adam(store, {config.learning_rate});
  ad::PlateauSchedule plateau(config.plateau_factor, config.plateau_patience);
  ad::Gradients grads(store);
  const Labels labels = make_labels(model, set.train);

  std::vector<Tensor> best;
  double best_val = INFINITY;
  std::vector<std::size_t> order(set.train.size());
  double lr = config.learning_rate;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffler(derive_seed(seed, 100, epoch));
    shuffler.shuffle(std::span<std::size_t>(order));
    adam.set_learning_rate(lr);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      ad::Graph g;
      Var loss = batch_loss(g, model, *set.features, set.train, labels, batch);
      const double value = loss.value().item();
      require(std::isfinite(value), Errc::non_finite,
              [&] { return "non-finite fine-tune loss at epoch " + std::to_string(epoch + 1); });
      total += value;
      g.backward(loss);
      grads.zero();
      grads.accumulate(g, store, 1.0 / double(batch.size()));
      adam.step(store, grads);
    }
    const double train_loss = total / double(order.size());
    const double val_loss =
        set.val.empty() ? train_loss : evaluate_loss(model, *set.features, set.val);
    result.train_loss.push_back(train_loss);
    result.val_loss.push_back(val_loss);
    result.learning_rate.push_back(lr);
    if (val_loss < best_val) {
      best_val = val_loss;
      result.best_epoch = epoch + 1;
      best.clear();
      for (const auto& p : store) best.push_back(p.value);
    }
    lr = plateau.update(val_loss, lr);
    if (after_epoch) after_epoch(epoch + 1, train_loss, val_loss);
  }
  for (std::size_t i = 0; i < best.size(); ++i) store[i].value = best[i];
}

std::unique_ptr<ForecastModel> finetune(mae::MaskedAutoencoder& encoder,
                                        std::span<const data::CycloneRecord> records,
                                        const data::NormStats& stats, const FinetuneConfig& config,
                                        std::uint64_t seed, FinetuneResult* result_out,
                                        const FinetuneHooks& hooks) {
  require(!records.empty(), Errc::insufficient_length, "no cyclones to fine-tune on");
  require(!config.leads.empty(), Errc::config, "no forecast leads configured");
  const Variable v = config.arch.variable;

  ad::ParamStore& frozen = encoder.params();
  std::map<std::string, std::uint64_t> checksums;
  for (const auto& group : frozen.groups()) {
    frozen.set_trainable(group, false);
    checksums[group] = frozen.checksum(group);
  }

  // Validation cyclones: a seeded draw of ids, independent of record order.
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.track.id);
  std::sort(ids.begin(), ids.end());
  Rng picker(derive_seed(seed, 77));
  picker.shuffle(std::span<std::string>(ids));
  std::size_t n_val = std::size_t(std::lround(config.val_fraction * double(ids.size())));
  if (ids.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
  else n_val = 0;
  const std::set<std::string> val_ids(ids.begin(), ids.begin() + std::ptrdiff_t(n_val));

  const FeatureTable features = featurize(encoder, records, stats, v);
  TrainingSet set;
  set.features = &features;
  for (auto& w : collect_windows(records, v, config.leads)) {
    (val_ids.count(records[w.cyclone].track.id) ? set.val : set.train).push_back(std::move(w));
  }
  require(!set.train.empty(), Errc::insufficient_length, "no training windows for fine-tuning");

  std::vector<HeadSpec> heads;
  for (std::size_t h = 0; h < config.leads.size(); ++h) {
    HeadSpec spec;
    spec.lead = config.leads[h];
    if (v == Variable::track) {
      spec.track = grid::track_binspec(spec.lead, config.track_bins);
    } else {
      std::vector<double> targets;
      for (const auto& w : set.train)
        if (w.scalar[h]) targets.push_back(*w.scalar[h]);
      require(!targets.empty(), Errc::insufficient_length,
              [&] { return "no training targets at lead " + std::to_string(spec.lead) + " h"; });
      spec.scalar = grid::fit_binspec_global_scan(targets, config.bins);
    }
    heads.push_back(spec);
  }

  FeatureNorm norm{std::vector<double>(features.width, 0.0), std::vector<double>(features.width, 0.0)};
  std::size_t count = 0;
  for (std::size_t c = 0; c < records.size(); ++c) {
    if (val_ids.count(records[c].track.id)) continue;
    for (const auto& row : features.rows[c]) {
      for (std::size_t i = 0; i < features.width; ++i) norm.mean[i] += row[i];
      ++count;
    }
  }
  for (double& m : norm.mean) m /= double(count);
  for (std::size_t c = 0; c < records.size(); ++c) {
    if (val_ids.count(records[c].track.id)) continue;
    for (const auto& row : features.rows[c]) {
      for (std::size_t i = 0; i < features.width; ++i) {
        const double d = row[i] - norm.mean[i];
        norm.stddev[i] += d * d;
      }
    }
  }
  for (double& s : norm.stddev) {
    s = std::sqrt(s / double(count));
    if (!(s > 1e-12)) s = 1.0;  // constant feature: pass through centred
  }

  ForecastArch arch = config.arch;
  arch.feature_width = features.width;
  auto model = std::make_unique<ForecastModel>(arch, std::move(heads), std::move(norm),
                                               derive_seed(seed, 5));
  FinetuneResult result;
  result.validation_ids.assign(val_ids.begin(), val_ids.end());
  train_model(*model, set, config, seed, result, [&](std::size_t epoch, double tl, double vl) {
    if (hooks.on_epoch) hooks.on_epoch(epoch, tl, vl);
    for (const auto& [group, sum] : checksums) {
      require(frozen.checksum(group) == sum, Errc::frozen_drift,
              [&] { return "frozen encoder group '" + group + "' changed during fine-tuning (epoch " +
                           std::to_string(epoch) + ")"; });
    }
  });
  if (result_out != nullptr) *result_out = std::move(result);
  return model;
}

}  // namespace cyclone::forecast
