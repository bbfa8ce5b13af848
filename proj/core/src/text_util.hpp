#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace spatial::detail {

inline std::string_view trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return text.substr(begin, end - begin);
}

inline std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool starts_with(std::string_view text, std::string_view prefix) {
  return text.substr(0, prefix.size()) == prefix;
}

inline bool ends_with(std::string_view text, std::string_view suffix) {
  return text.size() >= suffix.size() && text.substr(text.size() - suffix.size()) == suffix;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

/// Lowercased alphanumeric words.
inline std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

/// Strips a leading "name:" / "[name]:" label (any number of colons). Returns
/// false when the label is absent.
inline bool strip_label(std::string_view& line, std::string_view name) {
  std::string_view rest = trim(line);
  bool bracketed = false;
  if (!rest.empty() && rest.front() == '[') {
    bracketed = true;
    rest.remove_prefix(1);
  }
  if (!starts_with(rest, name)) return false;
  rest.remove_prefix(name.size());
  if (bracketed) {
    if (rest.empty() || rest.front() != ']') return false;
    rest.remove_prefix(1);
  }
  if (rest.empty() || rest.front() != ':') return false;
  while (!rest.empty() && rest.front() == ':') rest.remove_prefix(1);
  line = trim(rest);
  return true;
}

}  // namespace spatial::detail
