#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace vac {

// The five prediction targets. Attribute tasks come first; misfire is last.
enum class Task : std::size_t { fuel = 0, config = 1, cylinders = 2, aspiration = 3, misfire = 4 };

inline constexpr std::size_t kTaskCount = 5;
inline constexpr std::size_t kAttributeTaskCount = 4;
inline constexpr std::array<Task, kTaskCount> kAllTasks{Task::fuel, Task::config, Task::cylinders,
                                                        Task::aspiration, Task::misfire};
inline constexpr std::array<std::size_t, kTaskCount> kClassCounts{2, 3, 6, 2, 2};

// Width of the concatenated attribute log-probabilities fed to the misfire stage.
inline constexpr std::size_t kCascadeWidth = 2 + 3 + 6 + 2;

inline constexpr std::array<int, 6> kCylinderCounts{2, 3, 4, 5, 6, 8};

constexpr std::size_t index(Task t) noexcept { return static_cast<std::size_t>(t); }
constexpr std::size_t class_count(Task t) noexcept { return kClassCounts[index(t)]; }

// Manifest field names: fuel, config, cylinders, aspiration, status.
std::string_view manifest_key(Task t) noexcept;

// Short names used in logs and CSV headers: fuel, config, cyl, turbo, misfire.
std::string_view short_name(Task t) noexcept;

std::string_view class_name(Task t, std::size_t cls);

// Parses a class label ("diesel", "v", "6", "turbo", "misfire", ...).
std::optional<std::size_t> parse_class(Task t, std::string_view text) noexcept;

std::optional<std::size_t> cylinder_class(int cylinders) noexcept;

// Per-task class index with an optional mask (missing label => masked).
struct LabelSet {
  std::array<std::size_t, kTaskCount> value{};
  std::array<bool, kTaskCount> present{true, true, true, true, true};

  std::size_t operator[](Task t) const noexcept { return value[index(t)]; }
  bool has(Task t) const noexcept { return present[index(t)]; }
  void set(Task t, std::size_t cls) noexcept {
    value[index(t)] = cls;
    present[index(t)] = true;
  }
  void clear(Task t) noexcept { present[index(t)] = false; }

  // Stable key of the full label combination, e.g. "gasoline/inline/4/normal/normal".
  std::string combination_key() const;

  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

}  // namespace vac
