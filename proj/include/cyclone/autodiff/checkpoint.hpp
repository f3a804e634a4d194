#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "cyclone/autodiff/params.hpp"

namespace cyclone::ad {

// Checkpoint layout: <stem>.json manifest (name, group, shape, byte offset per
// tensor, plus free-form metadata) and <stem>.bin with the raw little-endian
// float64 values in manifest order.
void save_checkpoint(const ParamStore& store, const std::filesystem::path& manifest,
                     const nlohmann::json& meta = nlohmann::json::object());

ParamStore load_checkpoint(const std::filesystem::path& manifest,
                           nlohmann::json* meta = nullptr);

// Overwrites values of an existing store; names and shapes must match.
void load_into(ParamStore& store, const std::filesystem::path& manifest);

std::filesystem::path blob_path(const std::filesystem::path& manifest);

// FNV-1a of a file's bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace cyclone::ad
