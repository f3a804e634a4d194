#include "cyclone/autodiff/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "cyclone/binary_io.hpp"
#include "cyclone/error.hpp"

namespace cyclone::ad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "cyclonekit-params-v1";

struct Entry {
  std::string name;
  std::string group;
  Shape shape;
  std::size_t offset;
};

std::vector<Entry> read_manifest(const fs::path& manifest, json* meta, std::vector<double>* blob) {
  if (!fs::exists(manifest)) fail(Errc::missing_artifact, "checkpoint " + manifest.string() + " not found");
  json doc;
  try {
    doc = json::parse(read_text(manifest));
  } catch (const json::exception& e) {
    fail(Errc::io, manifest.string() + ": " + e.what());
  }
  if (doc.value("format", "") != kFormat) fail(Errc::io, manifest.string() + ": unknown checkpoint format");
  *blob = read_f64_le(manifest.parent_path() / doc.at("blob").get<std::string>());
  std::vector<Entry> entries;
  for (const auto& t : doc.at("tensors")) {
    Entry e{t.at("name"), t.at("group"), t.at("shape").get<Shape>(), t.at("offset")};
    const std::size_t bytes = numel(e.shape) * 8;
    if (e.offset % 8 != 0 || e.offset + bytes > blob->size() * 8) {
      fail(Errc::io, manifest.string() + ": tensor '" + e.name + "' lies outside the blob");
    }
    entries.push_back(std::move(e));
  }
  if (meta) *meta = doc.value("meta", json::object());
  return entries;
}

}  // namespace

fs::path blob_path(const fs::path& manifest) {
  fs::path p = manifest;
  return p.replace_extension(".bin");
}

void save_checkpoint(const ParamStore& store, const fs::path& manifest, const json& meta) {
  if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
  json tensors = json::array();
  std::vector<double> blob;
  blob.reserve(store.element_count());
  for (const auto& p : store) {
    tensors.push_back({{"name", p.name},
                       {"group", p.group},
                       {"shape", p.value.shape()},
                       {"offset", blob.size() * 8}});
    blob.insert(blob.end(), p.value.values().begin(), p.value.values().end());
  }
  const fs::path blob_file = blob_path(manifest);
  json doc = {{"format", kFormat},
              {"dtype", "float64-le"},
              {"blob", blob_file.filename().string()},
              {"tensors", std::move(tensors)},
              {"meta", meta}};
  write_f64_le(blob_file, blob);
  write_text(manifest, doc.dump(2) + "\n");
}

ParamStore load_checkpoint(const fs::path& manifest, json* meta) {
  std::vector<double> blob;
  const auto entries = read_manifest(manifest, meta, &blob);
  ParamStore store;
  for (const auto& e : entries) {
    const auto first = blob.begin() + std::ptrdiff_t(e.offset / 8);
    store.add(e.name, e.group,
              Tensor(e.shape, std::vector<double>(first, first + std::ptrdiff_t(numel(e.shape)))));
  }
  return store;
}

void load_into(ParamStore& store, const fs::path& manifest) {
  std::vector<double> blob;
  const auto entries = read_manifest(manifest, nullptr, &blob);
  require(entries.size() == store.size(), Errc::contract,
          [&] { return manifest.string() + ": tensor count differs from the model"; });
  for (const auto& e : entries) {
    Parameter& p = store.at(e.name);
    require(p.value.shape() == e.shape, Errc::dimension,
            [&] { return "checkpoint tensor '" + e.name + "' has shape " + to_string(e.shape) +
                ", model expects " + to_string(p.value.shape()); });
    std::copy_n(blob.begin() + std::ptrdiff_t(e.offset / 8), p.value.size(), p.value.values().begin());
  }
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cyclone::ad
