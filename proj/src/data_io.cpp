// Copyright 2026 The xforest Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xforest/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string_view>
#include <vector>

namespace xforest {

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line, const char* what) {
  T value{};
  const auto [ptr, ec] =
      std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw DataError(line, std::string("non-numeric ") + what + " '" +
                              std::string(tok) + "'");
  }
  return value;
}

Index parse_index(std::string_view tok, std::size_t line, Index dim,
                  const char* what) {
  const auto v = parse_number<std::uint64_t>(tok, line, what);
  if (v >= dim) {
    throw DataError(line, std::string(what) + " " + std::string(tok) +
                              " >= declared dimension " + std::to_string(dim));
  }
  return static_cast<Index>(v);
}

void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

void parse_row(std::string_view line, std::size_t lineno, Index d_x, Index d_y,
               SparseMatrix& features, SparseMatrix& labels) {
  const bool starts_blank = line.empty() || line[0] == ' ' || line[0] == '\t';
  auto tokens = split_ws(line);
  std::size_t first_feature = 0;

  std::vector<Entry> label_entries;
  if (!starts_blank && !tokens.empty() &&
      tokens[0].find(':') == std::string_view::npos) {
    std::string_view list = tokens[0];
    first_feature = 1;
    std::size_t pos = 0;
    while (pos <= list.size()) {
      const std::size_t comma = std::min(list.find(',', pos), list.size());
      const std::string_view tok = list.substr(pos, comma - pos);
      if (tok.empty()) throw DataError(lineno, "empty label in label list");
      label_entries.push_back({parse_index(tok, lineno, d_y, "label"), 1.0});
      pos = comma + 1;
    }
    std::sort(label_entries.begin(), label_entries.end(),
              [](const Entry& a, const Entry& b) { return a.col < b.col; });
    label_entries.erase(
        std::unique(label_entries.begin(), label_entries.end(),
                    [](const Entry& a, const Entry& b) { return a.col == b.col; }),
        label_entries.end());
  }

  std::vector<Entry> feature_entries;
  feature_entries.reserve(tokens.size() - first_feature);
  for (std::size_t t = first_feature; t < tokens.size(); ++t) {
    const std::string_view tok = tokens[t];
    const std::size_t colon = tok.find(':');
    if (colon == std::string_view::npos) {
      throw DataError(lineno, "feature token without ':' '" + std::string(tok) +
                                  "'");
    }
    const Index col = parse_index(tok.substr(0, colon), lineno, d_x, "feature");
    const double val =
        parse_number<double>(tok.substr(colon + 1), lineno, "feature value");
    if (val != 0.0) feature_entries.push_back({col, val});
  }
  std::sort(feature_entries.begin(), feature_entries.end(),
            [](const Entry& a, const Entry& b) { return a.col < b.col; });
  for (std::size_t i = 1; i < feature_entries.size(); ++i) {
    if (feature_entries[i].col == feature_entries[i - 1].col) {
      throw DataError(lineno, "duplicate feature index " +
                                  std::to_string(feature_entries[i].col));
    }
  }

  features.push_back(SparseVec(d_x, std::move(feature_entries)));
  labels.push_back(SparseVec(d_y, std::move(label_entries)));
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

Dataset parse_xmlc(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(1, "missing header");
  strip_cr(line);
  const auto header = split_ws(line);
  if (header.size() != 3) {
    throw DataError(1, "malformed header: expected 'n d_x d_y', got " +
                           std::to_string(header.size()) + " fields");
  }
  XmlcHeader h;
  h.n = parse_number<std::size_t>(header[0], 1, "header field");
  const auto dx = parse_number<std::uint64_t>(header[1], 1, "header field");
  const auto dy = parse_number<std::uint64_t>(header[2], 1, "header field");
  constexpr auto kMaxDim = std::numeric_limits<Index>::max();
  if (h.n == 0 || dx == 0 || dy == 0) {
    throw DataError(1, "malformed header: all fields must be positive");
  }
  if (dx > kMaxDim || dy > kMaxDim) {
    throw DataError(1, "malformed header: dimension too large");
  }
  h.d_x = static_cast<Index>(dx);
  h.d_y = static_cast<Index>(dy);

  Dataset d{SparseMatrix(h.d_x), SparseMatrix(h.d_y)};
  std::size_t lineno = 1;
  for (std::size_t i = 0; i < h.n; ++i) {
    ++lineno;
    if (!std::getline(in, line)) {
      throw DataError(lineno, "expected " + std::to_string(h.n) +
                                  " data lines, found " + std::to_string(i));
    }
    strip_cr(line);
    parse_row(line, lineno, h.d_x, h.d_y, d.features, d.labels);
  }
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (!split_ws(line).empty()) {
      throw DataError(lineno, "more data lines than the declared " +
                                  std::to_string(h.n));
    }
  }
  return d;
}

void write_xmlc(const Dataset& d, std::ostream& out) {
  d.validate();
  out << d.n() << ' ' << d.d_x() << ' ' << d.d_y() << '\n';
  std::string line;
  for (std::size_t i = 0; i < d.n(); ++i) {
    line.clear();
    bool first = true;
    for (const Entry& e : d.labels[i]) {
      if (!first) line.push_back(',');
      line += std::to_string(e.col);
      first = false;
    }
    line.push_back(' ');
    first = true;
    for (const Entry& e : d.features[i]) {
      if (!first) line.push_back(' ');
      line += std::to_string(e.col);
      line.push_back(':');
      append_number(line, e.val);
      first = false;
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw std::runtime_error("write_xmlc: stream write failed");
}

Dataset read_xmlc_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(0, "cannot open data file " + path.string());
  try {
    return parse_xmlc(in);
  } catch (const DataError& e) {
    throw DataError(path.string(), e);
  }
}

void write_xmlc_file(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_xmlc(d, out);
}

}  // namespace xforest
