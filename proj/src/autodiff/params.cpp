#include "cyclone/autodiff/params.hpp"

#include <algorithm>
#include <cstring>

#include "cyclone/error.hpp"

namespace cyclone::ad {

Parameter& ParamStore::add(std::string name, std::string group, Tensor init) {
  require(!index_.contains(name), Errc::contract,
          [&] { return "duplicate parameter '" + name + "'"; });
  index_.emplace(name, params_.size());
  params_.push_back({std::move(name), std::move(group), std::move(init), true});
  return params_.back();
}

Parameter& ParamStore::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) fail(Errc::contract, "unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

const Parameter& ParamStore::at(std::string_view name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

const Parameter* ParamStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

std::size_t ParamStore::element_count() const noexcept {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

void ParamStore::set_trainable(std::string_view group, bool trainable) {
  bool any = false;
  for (auto& p : params_) {
    if (p.group == group) {
      p.trainable = trainable;
      any = true;
    }
  }
  require(any, Errc::contract, [&] { return "no parameters in group '" + std::string(group) + "'"; });
}

std::vector<std::string> ParamStore::groups() const {
  std::vector<std::string> out;
  for (const auto& p : params_) {
    if (std::find(out.begin(), out.end(), p.group) == out.end()) out.push_back(p.group);
  }
  return out;
}

std::uint64_t ParamStore::checksum(std::string_view group) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params_) {
    if (p.group != group) continue;
    feed(p.name.data(), p.name.size());
    for (auto extent : p.value.shape()) {
      const std::uint64_t e = extent;
      feed(&e, sizeof e);
    }
    feed(p.value.values().data(), p.value.size() * sizeof(double));
  }
  return h;
}

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal(0.0, stddev);
  return t;
}

}  // namespace cyclone::ad
