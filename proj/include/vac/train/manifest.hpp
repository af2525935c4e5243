#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vac/audio.hpp"
#include "vac/labels.hpp"

namespace vac::train {

// One source recording. `file` is absolute after reading; relative paths in
// the JSON-lines text are resolved against the manifest's directory.
struct ManifestRow {
  std::filesystem::path file;
  std::string source_id;
  LabelSet labels;
  audio::Split split = audio::Split::unassigned;
  std::optional<double> rpm;  // informational, written by the synthesizer
};

using Manifest = std::vector<ManifestRow>;

// Parses JSON lines with fields {file, source_id, fuel, config, cylinders,
// aspiration, status, split?}. A missing label field masks that task.
Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir, bool require_files = true);
Manifest read_manifest(const std::filesystem::path& path, bool require_files = true);

// File paths are written relative to `base_dir` when they live beneath it.
std::string format_manifest_row(const ManifestRow& row, const std::filesystem::path& base_dir);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

}  // namespace vac::train
