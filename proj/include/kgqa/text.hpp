#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace kgqa {

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Lowercased alphanumeric tokens; everything else is a separator.
inline std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Light suffix stripping so that "movies"/"movie" and "directed"/"direct"
// land on the same token.
inline std::string stem_token(std::string t) {
  auto ends = [&](const char* suf) {
    size_t n = std::char_traits<char>::length(suf);
    return t.size() > n && t.compare(t.size() - n, n, suf) == 0;
  };
  if (t.size() >= 5 && ends("ing")) t.erase(t.size() - 3);
  else if (t.size() >= 4 && ends("ed")) t.erase(t.size() - 2);
  else if (t.size() >= 4 && ends("s") && !ends("ss")) t.erase(t.size() - 1);
  if (t.size() >= 4 && ends("e")) t.erase(t.size() - 1);  // produce/produced, movie/movies
  return t;
}

inline std::set<std::string> stemmed_token_set(const std::string& s) {
  std::set<std::string> out;
  for (auto& t : tokenize(s)) out.insert(stem_token(t));
  return out;
}

inline double lexical_f1(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  size_t inter = 0;
  for (auto& t : a)
    if (b.count(t)) ++inter;
  if (inter == 0) return 0.0;
  double p = double(inter) / double(a.size());
  double r = double(inter) / double(b.size());
  return 2.0 * p * r / (p + r);
}

}  // namespace kgqa
