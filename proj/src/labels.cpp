#include "vac/labels.hpp"

#include <stdexcept>

namespace vac {
namespace {

constexpr std::array<std::string_view, 2> kFuel{"gasoline", "diesel"};
constexpr std::array<std::string_view, 3> kConfig{"flat", "inline", "v"};
constexpr std::array<std::string_view, 6> kCylinders{"2", "3", "4", "5", "6", "8"};
constexpr std::array<std::string_view, 2> kAspiration{"normal", "turbo"};
constexpr std::array<std::string_view, 2> kStatus{"normal", "misfire"};

template <std::size_t N>
std::optional<std::size_t> find(const std::array<std::string_view, N>& names, std::string_view text) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == text) return i;
  return std::nullopt;
}

}  // namespace

std::string_view manifest_key(Task t) noexcept {
  switch (t) {
    case Task::fuel: return "fuel";
    case Task::config: return "config";
    case Task::cylinders: return "cylinders";
    case Task::aspiration: return "aspiration";
    case Task::misfire: return "status";
  }
  return "";
}

std::string_view short_name(Task t) noexcept {
  switch (t) {
    case Task::fuel: return "fuel";
    case Task::config: return "config";
    case Task::cylinders: return "cyl";
    case Task::aspiration: return "turbo";
    case Task::misfire: return "misfire";
  }
  return "";
}

std::string_view class_name(Task t, std::size_t cls) {
  if (cls >= class_count(t)) throw std::out_of_range("class index out of range");
  switch (t) {
    case Task::fuel: return kFuel[cls];
    case Task::config: return kConfig[cls];
    case Task::cylinders: return kCylinders[cls];
    case Task::aspiration: return kAspiration[cls];
    case Task::misfire: return kStatus[cls];
  }
  return "";
}

std::optional<std::size_t> parse_class(Task t, std::string_view text) noexcept {
  switch (t) {
    case Task::fuel: return find(kFuel, text);
    case Task::config: return find(kConfig, text);
    case Task::cylinders: return find(kCylinders, text);
    case Task::aspiration: return find(kAspiration, text);
    case Task::misfire: return find(kStatus, text);
  }
  return std::nullopt;
}

std::optional<std::size_t> cylinder_class(int cylinders) noexcept {
  for (std::size_t i = 0; i < kCylinderCounts.size(); ++i)
    if (kCylinderCounts[i] == cylinders) return i;
  return std::nullopt;
}

std::string LabelSet::combination_key() const {
  std::string key;
  for (Task t : kAllTasks) {
    if (!key.empty()) key += '/';
    key += has(t) ? std::string(class_name(t, (*this)[t])) : std::string("?");
  }
  return key;
}

}  // namespace vac
