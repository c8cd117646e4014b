#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwr/engine.hpp"

namespace cwr {

/// Model container layout (all integers little-endian):
///
///   bytes 0..3   magic "CWRM"
///   bytes 4..7   u32 header length H
///   bytes 8..8+H UTF-8 JSON header: format_version, metadata, layer specs,
///                per-tensor shape/offset/size, blob_size, blob_checksum (crc32)
///   remainder    parameter blob, f32 little-endian, per layer weight then bias
inline constexpr int kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const Model& model);
Model deserialize_model(std::span<const std::uint8_t> bytes);

/// Parses only the JSON header (no blob validation).
nlohmann::json read_model_header(std::span<const std::uint8_t> bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// Identity hash of a model: crc32 of its serialized container.
std::string model_hash(const Model& model);

nlohmann::json layer_to_json(const LayerSpec& layer);
LayerSpec layer_from_json(const nlohmann::json& j);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cwr
