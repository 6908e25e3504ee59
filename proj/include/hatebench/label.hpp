#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace hatebench {

enum class Label : int { Clean = 0, Offensive = 1, Hate = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<Label, kNumClasses> kAllLabels{Label::Clean, Label::Offensive, Label::Hate};

inline constexpr int to_index(Label l) { return static_cast<int>(l); }

inline Label label_from_index(int i) { return static_cast<Label>(i); }

inline const char* label_name(Label l) {
  switch (l) {
    case Label::Clean: return "CLEAN";
    case Label::Offensive: return "OFFENSIVE";
    case Label::Hate: return "HATE";
  }
  return "?";
}

/// Accepts "0".."2" or the label names in any letter case.
inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "0") return Label::Clean;
  if (s == "1") return Label::Offensive;
  if (s == "2") return Label::Hate;
  std::string up(s);
  for (char& c : up) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  if (up == "CLEAN") return Label::Clean;
  if (up == "OFFENSIVE") return Label::Offensive;
  if (up == "HATE") return Label::Hate;
  return std::nullopt;
}

inline constexpr const char* kLabelLegend = "0 - CLEAN, 1 - OFFENSIVE, 2 - HATE";

}  // namespace hatebench
