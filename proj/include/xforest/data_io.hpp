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

// Reader and writer for the extreme-classification repository text format:
//
//   n d_x d_y
//   l1,l2,...,lk f1:v1 f2:v2 ...
//
// One data line per instance, 0-based indices. A line with no labels starts
// with a space (or its first token already contains ':').

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "xforest/sparse.hpp"

namespace xforest {

struct XmlcHeader {
  std::size_t n = 0;
  Index d_x = 0;
  Index d_y = 0;
};

// Malformed input. line() is 1-based; 0 when not tied to a line.
class DataError : public std::runtime_error {
 public:
  DataError(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " +
                                           what),
        line_(line) {}
  // Prefixes `context` (typically a path) to an existing error.
  DataError(const std::string& context, const DataError& inner)
      : std::runtime_error(context + ": " + inner.what()),
        line_(inner.line()) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

Dataset parse_xmlc(std::istream& in);
void write_xmlc(const Dataset& d, std::ostream& out);

// File wrappers; a missing file is a DataError carrying the path.
Dataset read_xmlc_file(const std::filesystem::path& path);
void write_xmlc_file(const Dataset& d, const std::filesystem::path& path);

}  // namespace xforest
