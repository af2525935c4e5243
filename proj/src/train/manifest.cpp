#include "vac/train/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vac/error.hpp"

namespace vac::train {
namespace {

using nlohmann::json;

std::string label_text(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  throw Error(ErrorCode::InvalidArgument, "label must be a string or integer");
}

}  // namespace

Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir, bool require_files) {
  Manifest rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "manifest line " + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::InvalidArgument, where + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("file") || !obj["file"].is_string())
      throw Error(ErrorCode::InvalidArgument, where + ": missing \"file\"");
    ManifestRow row;
    row.file = obj["file"].get<std::string>();
    if (row.file.is_relative()) row.file = base_dir / row.file;
    row.source_id = obj.contains("source_id") ? obj["source_id"].get<std::string>() : row.file.stem().string();
    for (Task t : kAllTasks) {
      const auto key = std::string(manifest_key(t));
      if (!obj.contains(key) || obj[key].is_null()) {
        row.labels.clear(t);
        continue;
      }
      const auto value = label_text(obj[key]);
      const auto cls = parse_class(t, value);
      if (!cls) throw Error(ErrorCode::InvalidArgument, where + ": invalid " + key + " label '" + value + "'");
      row.labels.set(t, *cls);
    }
    if (obj.contains("split") && !obj["split"].is_null()) {
      try {
        row.split = audio::parse_split(obj["split"].get<std::string>());
      } catch (const std::exception& e) {
        throw Error(ErrorCode::InvalidArgument, where + ": " + e.what());
      }
    }
    if (obj.contains("rpm") && obj["rpm"].is_number()) row.rpm = obj["rpm"].get<double>();
    if (require_files && !std::filesystem::exists(row.file))
      throw Error(ErrorCode::IoFailure, where + ": file not found: " + row.file.string());
    rows.push_back(std::move(row));
  }
  return rows;
}

Manifest read_manifest(const std::filesystem::path& path, bool require_files) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path(), require_files);
}

std::string format_manifest_row(const ManifestRow& row, const std::filesystem::path& base_dir) {
  json obj = json::object();
  // Files under base_dir are stored relative to it, anything else absolute.
  auto file = row.file;
  if (!base_dir.empty()) {
    file = std::filesystem::absolute(row.file).lexically_normal();
    const auto rel = file.lexically_relative(std::filesystem::absolute(base_dir).lexically_normal());
    if (!rel.empty() && *rel.begin() != "..") file = rel;
  }
  obj["file"] = file.generic_string();
  obj["source_id"] = row.source_id;
  for (Task t : kAllTasks) {
    if (!row.labels.has(t)) continue;
    const auto name = std::string(class_name(t, row.labels[t]));
    if (t == Task::cylinders)
      obj[std::string(manifest_key(t))] = std::stoi(name);
    else
      obj[std::string(manifest_key(t))] = name;
  }
  if (row.split != audio::Split::unassigned) obj["split"] = std::string(audio::to_string(row.split));
  if (row.rpm) obj["rpm"] = *row.rpm;
  return obj.dump();
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write manifest " + path.string());
  const auto base = path.parent_path();
  for (const auto& row : manifest) out << format_manifest_row(row, base) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

}  // namespace vac::train
