#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "cyclone/data/dataset_io.hpp"
#include "cyclone/data/preprocess.hpp"
#include "cyclone/data/synth.hpp"
#include "cyclone/error.hpp"

using namespace cyclone;
using namespace cyclone::data;

namespace {

VortexConfig small_vortex() {
  VortexConfig v;
  v.geometry = {16, 16, 28.0, 20.0};
  v.steps = 25;
  return v;
}

double sat_at(const TCSample& s, std::size_t i, std::size_t j, std::size_t c) {
  const std::size_t w = s.sat.dim(1);
  return s.sat.values()[(i * w + j) * kSatChannelCount + c];
}

template <typename Fn>
Errc error_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::contract;
}

}  // namespace

TEST_CASE("noise-free vortex has base_temp - A at the centre pixel") {
  VortexConfig v = small_vortex();
  v.noise = 0.0;
  const auto rec = synth_cyclone(v, 7);
  const std::size_t c = v.geometry.sat_hw / 2;
  for (const auto& s : rec.samples) CHECK(sat_at(s, c, c, 0) == v.base_temp - v.amplitude);
  validate(rec);
}

TEST_CASE("linear drift moves the centre by four steps of drift") {
  VortexConfig v = small_vortex();
  v.drift_lat = 0.5;
  v.drift_lon = 0.5;
  const auto rec = synth_cyclone(v, 1);
  CHECK(rec.track.points[4].lat == doctest::Approx(v.start_lat + 2.0).epsilon(1e-12));
  CHECK(rec.track.points[4].lon == doctest::Approx(v.start_lon + 2.0).epsilon(1e-12));
  CHECK(rec.samples[4].lat() == rec.track.points[4].lat);
}

TEST_CASE("same seed gives bit-identical cyclones") {
  VortexConfig v = small_vortex();
  v.noise = 0.1;
  v.obs_noise = 0.5;
  const auto a = synth_cyclone(v, 42);
  const auto b = synth_cyclone(v, 42);
  const auto c = synth_cyclone(v, 43);
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    CHECK(a.samples[k].sat == b.samples[k].sat);
    CHECK(a.samples[k].era5 == b.samples[k].era5);
    CHECK(a.samples[k].att == b.samples[k].att);
  }
  CHECK_FALSE(a.samples[0].sat == c.samples[0].sat);
}

TEST_CASE("too-short cyclone is rejected") {
  VortexConfig v = small_vortex();
  v.steps = 24;  // 5 window steps + 20 lead steps are needed
  CHECK(error_code([&] { synth_cyclone(v, 0); }) == Errc::insufficient_length);
  v.max_lead_hours = 24;
  v.steps = 9;
  CHECK(error_code([&] { synth_cyclone(v, 0); }) == Errc::insufficient_length);
  v.steps = 10;
  CHECK_NOTHROW(synth_cyclone(v, 0));
}

TEST_CASE("msl minimum sits on the recorded centre") {
  VortexConfig v = small_vortex();
  v.geometry.era5_hw = 32;
  const auto rec = synth_cyclone(v, 3);
  const std::size_t hw = v.geometry.era5_hw;
  const std::size_t msl = kEra5ChannelCount - 1;
  for (const auto& s : rec.samples) {
    std::size_t best = 0;
    for (std::size_t p = 1; p < hw * hw; ++p) {
      if (s.era5.values()[p * kEra5ChannelCount + msl] < s.era5.values()[best * kEra5ChannelCount + msl]) best = p;
    }
    const long di = long(best / hw) - long(hw / 2), dj = long(best % hw) - long(hw / 2);
    CHECK(std::max(std::labs(di), std::labs(dj)) <= 1);
    CHECK(s.era5.values()[best * kEra5ChannelCount + msl] == doctest::Approx(s.att[kMslp]));
  }
}

TEST_CASE("winds rotate cyclonically in each hemisphere") {
  for (double lat : {15.0, -15.0}) {
    VortexConfig v = small_vortex();
    v.start_lat = lat;
    v.drift_lat = 0.0;
    v.drift_lon = 0.0;
    const auto rec = synth_cyclone(v, 0);
    const auto& e = rec.samples[0].era5;
    const std::size_t hw = v.geometry.era5_hw, c = hw / 2;
    // East of the centre the 10 m meridional wind points poleward-of-rotation:
    // northward in the north, southward in the south.
    const double v10 = e.values()[(c * hw + c + 2) * kEra5ChannelCount + 11];
    CHECK(v10 * lat > 0.0);
  }
}

TEST_CASE("bilinear sample at the vertical midpoint of [[0,0],[2,2]]") {
  ad::Tensor f({2, 2, 1}, {0, 0, 2, 2});
  CHECK(bilinear_sample(f, 0, 0.5, 0.0, -1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(bilinear_sample(f, 0, 0.5, 0.5, -1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(bilinear_sample(f, 0, 1.0, 1.0, -1.0) == 2.0);
  CHECK(bilinear_sample(f, 0, 1.5, 0.0, -1.0) == -1.0);
}

TEST_CASE("crop aligned to the source grid copies values") {
  ad::Tensor src({10, 10, 2});
  for (std::size_t i = 0; i < src.size(); ++i) src[i] = std::sin(0.37 * double(i));
  GeoField field{src, 10.0, 100.0, -1.0, 1.0};
  // Output pixel centres land on rows 2..5 and columns 3..6.
  const ad::Tensor out = center_crop_resample(field, {6.5, 104.5}, 4.0, 4, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      for (std::size_t k = 0; k < 2; ++k) {
        CHECK(out.values()[(i * 4 + j) * 2 + k] ==
              doctest::Approx(src.values()[((i + 2) * 10 + j + 3) * 2 + k]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("constant field crops to a constant, including outside the grid") {
  GeoField field{ad::Tensor({6, 6, 1}, 3.25), 5.0, 0.0, -1.0, 1.0};
  for (GeoPoint c : {GeoPoint{2.5, 2.5}, GeoPoint{40.0, -20.0}, GeoPoint{0.0, 5.0}}) {
    const ad::Tensor out = center_crop_resample(field, c, 8.0, 5, 5);
    for (double v : out.values()) CHECK(v == doctest::Approx(3.25));
  }
  CHECK(error_code([&] { center_crop_resample(field, {0, 0}, 0.0, 4, 4); }) == Errc::contract);
  CHECK(error_code([&] { center_crop_resample(field, {0, 0}, -2.0, 4, 4); }) == Errc::contract);
}

TEST_CASE("out-of-bounds crop pixels take the channel mean") {
  ad::Tensor src({2, 2, 1}, {1, 2, 3, 6});
  GeoField field{src, 1.0, 0.0, -1.0, 1.0};
  const ad::Tensor out = center_crop_resample(field, {50.0, 50.0}, 2.0, 2, 2);
  for (double v : out.values()) CHECK(v == doctest::Approx(3.0));
}

TEST_CASE("z-score of [1,2,3]") {
  ad::Tensor x({3, 1}, {1, 2, 3});
  ChannelStats s{{2.0}, {std::sqrt(2.0 / 3.0)}};
  zscore_inplace(x, s);
  CHECK(x[0] == doctest::Approx(-1.22474487).epsilon(1e-8));
  CHECK(x[1] == doctest::Approx(0.0));
  CHECK(x[2] == doctest::Approx(1.22474487).epsilon(1e-8));

  ad::Tensor y({2, 2}, {0.3, -1.2, 2.0, 0.5});
  const ad::Tensor y0 = y;
  zscore_inplace(y, ChannelStats{{0.0, 0.0}, {1.0, 1.0}});
  CHECK(y == y0);
}

TEST_CASE("fit_stats over the fit set standardises every channel") {
  SynthDatasetConfig cfg;
  cfg.cyclones = 3;
  cfg.geometry = {8, 8, 28.0, 20.0};
  const auto recs = synth_dataset(cfg, 11);
  const NormStats stats = fit_stats(std::span<const CycloneRecord>(recs));

  std::vector<TCSample> z;
  for (const auto& r : recs)
    for (const auto& s : r.samples) z.push_back(zscore(s, stats));
  const NormStats again = fit_stats(std::span<const TCSample>(z));
  for (const ChannelStats* cs : {&again.sat, &again.era5, &again.att}) {
    for (std::size_t k = 0; k < cs->mean.size(); ++k) {
      CHECK(std::abs(cs->mean[k]) < 1e-10);
      CHECK(std::abs(cs->stddev[k] - 1.0) < 1e-10);
    }
  }

  const TCSample& orig = recs[1].samples[3];
  const TCSample back = unzscore(zscore(orig, stats), stats);
  for (std::size_t i = 0; i < orig.era5.size(); ++i) {
    CHECK(std::abs(back.era5[i] - orig.era5[i]) <= 1e-10 * std::max(1.0, std::abs(orig.era5[i])));
  }
  for (std::size_t k = 0; k < kAttCount; ++k) CHECK(std::abs(back.att[k] - orig.att[k]) < 1e-10);

  const NormStats parsed = NormStats::from_json(stats.to_json());
  CHECK(parsed.era5.stddev == stats.era5.stddev);
}

TEST_CASE("constant channel is a degenerate-channel error") {
  VortexConfig v = small_vortex();
  v.amplitude = 0.0;  // IR is then exactly base_temp everywhere
  const auto rec = synth_cyclone(v, 0);
  CHECK(error_code([&] { fit_stats(std::span<const TCSample>(rec.samples)); }) == Errc::degenerate);
}

TEST_CASE("12 h to 6 h upsampling") {
  const TimePoint t0 = make_time(2021, 8, 1, 0);
  const std::vector<Timed<double>> two{{t0, 10.0}, {t0 + std::chrono::hours(12), 20.0}};
  const auto up = upsample_12h_to_6h(std::span<const Timed<double>>(two));
  REQUIRE(up.size() == 3);
  CHECK(up[1].time == t0 + std::chrono::hours(6));
  CHECK(up[1].value == 15.0);
  CHECK(up[0].value == 10.0);
  CHECK(up[2].value == 20.0);

  const std::vector<Timed<double>> tri{
      {t0, 0.0}, {t0 + std::chrono::hours(12), 10.0}, {t0 + std::chrono::hours(24), 0.0}};
  const auto up3 = upsample_12h_to_6h(std::span<const Timed<double>>(tri));
  REQUIRE(up3.size() == 5);
  CHECK(up3[1].value == 5.0);
  CHECK(up3[3].value == 5.0);

  const std::vector<Timed<ad::Tensor>> flat{{t0, ad::Tensor({2}, 4.0)},
                                            {t0 + std::chrono::hours(12), ad::Tensor({2}, 4.0)}};
  const auto upt = upsample_12h_to_6h(std::span<const Timed<ad::Tensor>>(flat));
  CHECK(upt[1].value == ad::Tensor({2}, 4.0));

  const std::vector<Timed<double>> bad{{t0, 0.0}, {t0 + std::chrono::hours(18), 1.0}};
  CHECK(error_code([&] { upsample_12h_to_6h(std::span<const Timed<double>>(bad)); }) == Errc::alignment);
}

TEST_CASE("window extraction") {
  const auto rec = synth_cyclone(small_vortex(), 5);
  REQUIRE(rec.samples.size() == 25);
  const auto leads = all_leads();
  const TimePoint t0 = rec.samples[4].time;
  const Window w = build_window(rec, t0, leads);
  for (std::size_t k = 0; k < kWindowSteps; ++k) CHECK(w.inputs[k] == &rec.samples[k]);
  CHECK(max_available_lead_hours(rec, t0) == 120);
  CHECK(w.targets.at(6).mslp == rec.track.points[5].mslp);
  CHECK(w.targets.at(120).time == rec.track.points[24].time);

  try {
    build_window(rec, rec.samples[3].time, leads);
    FAIL("expected a gap error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::gap);
    CHECK(std::string(e.what()).find(format_iso8601(rec.samples[0].time - kStep)) != std::string::npos);
  }
  CHECK(forecast_origins(rec, leads).size() == 1);
  const std::vector<int> short_leads{6, 12};
  CHECK(forecast_origins(rec, short_leads).size() == 25 - 4 - 2);
}

TEST_CASE("dataset round trip through disk") {
  SynthDatasetConfig cfg;
  cfg.cyclones = 2;
  cfg.geometry = {8, 8, 28.0, 20.0};
  const auto recs = synth_dataset(cfg, 9);
  const auto dir = std::filesystem::temp_directory_path() / "cyclonekit_test_dataset";
  std::filesystem::remove_all(dir);
  write_dataset(dir, recs, cfg.geometry, {{"seed", 9}});
  nlohmann::json meta;
  const auto back = read_dataset(dir, &meta);
  CHECK(meta.at("seed") == 9);
  REQUIRE(back.size() == 2);
  for (std::size_t n = 0; n < 2; ++n) {
    CHECK(back[n].track.id == recs[n].track.id);
    CHECK(back[n].track.basin == recs[n].track.basin);
    REQUIRE(back[n].samples.size() == recs[n].samples.size());
    for (std::size_t k = 0; k < recs[n].samples.size(); ++k) {
      const auto& a = recs[n].samples[k];
      const auto& b = back[n].samples[k];
      CHECK(a.time == b.time);
      for (std::size_t i = 0; i < a.era5.size(); ++i) {
        CHECK(std::abs(a.era5[i] - b.era5[i]) <= 1e-6 * std::max(1.0, std::abs(a.era5[i])));
      }
      CHECK(b.att[kMsw] == doctest::Approx(a.att[kMsw]).epsilon(1e-6));
    }
  }
  CHECK(error_code([&] { read_dataset(dir / "nope"); }) == Errc::missing_artifact);
  std::filesystem::remove_all(dir);
}
