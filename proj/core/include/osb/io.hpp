#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "osb/embedding.hpp"

namespace osb {

enum class EmbeddingFormat { Csv, BinaryF32 };

/// `.csv` maps to Csv; anything else (conventionally `.osbe`) to BinaryF32.
EmbeddingFormat format_from_path(const std::filesystem::path& path);
EmbeddingFormat parse_format(std::string_view text);

/// Reads an embedding file.
///
/// CSV: header `subject_id,sample_id,f0,...,f{D-1}`, one record per line.
/// BinaryF32: `OSBE` magic, u32 version (1), u32 count, u32 dim, then per
/// record a u16-length-prefixed subject id, a u16-length-prefixed sample id,
/// and `dim` little-endian f32 values. If `<path>.meta.json` exists it must
/// agree on count and dim, and supplies the metric.
///
/// `metric` overrides whatever the file or sidecar says. Errors are thrown as
/// DataError carrying the 1-based record number.
EmbeddingSet load_embeddings(const std::filesystem::path& path, EmbeddingFormat format,
                             std::optional<Metric> metric = std::nullopt);

/// Writes `set`. BinaryF32 additionally writes the `<path>.meta.json` sidecar.
/// CSV values carry 9 significant digits.
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                     EmbeddingFormat format);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

/// `%.9g` rendering shared by every CSV writer.
std::string format_real(double value);
/// `%.17g` rendering for values that must round-trip exactly (JSON, reports).
std::string format_exact(double value);

/// Splits a CSV line on commas. No quoting support: ids must not contain
/// commas, quotes, or line breaks.
std::vector<std::string_view> split_csv_line(std::string_view line);
double parse_real(std::string_view text, std::size_t row);

}  // namespace osb
