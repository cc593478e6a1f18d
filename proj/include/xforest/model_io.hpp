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

// Binary model container. All integers little-endian, reals IEEE-754
// binary64.
//
//   model      := "DXMF" u32:version config trees
//   config     := u32:len  u32:k u32:n_leaf u32:n_s u32:proj_dx u32:proj_dy
//                 u32:proj_cap u8:dx_rule u32:kmeans_iters u64:master_seed
//                 u32:m_F u32:d_x u32:d_y
//   trees      := u32:count tree_block{count}
//   tree_block := u64:len  u64:tree_index spec:features spec:labels
//                 u64:node_seed u32:label_dim u64:node_count node{node_count}
//   spec       := u32:out_dim u64:seed_index u64:seed_sign
//   node       := u8:0 svec                      (leaf, dim = label_dim)
//               | u8:1 u32:k svec{k}             (internal, dim = features
//                                                 out_dim), then k children
//   svec       := u32:nnz (u32:col f64:val){nnz}
//
// Nodes are written in preorder. `len` fields count the bytes that follow
// them within the block.
//
// A tree set (the payload a worker ships to the master) is
//
//   tree_set   := u32:version u32:d_x u32:d_y u32:count tree_block{count}

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "xforest/forest.hpp"

namespace xforest {

using Bytes = std::vector<std::uint8_t>;

inline constexpr char kModelMagic[4] = {'D', 'X', 'M', 'F'};

class ModelFormatError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kTruncated, kCorrupt };
  ModelFormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Little-endian append-only encoder.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(std::span<const std::uint8_t> bytes);
  std::size_t size() const { return out_.size(); }
  // Overwrites a previously written u32/u64 at `offset`.
  void patch_u32(std::size_t offset, std::uint32_t v);
  void patch_u64(std::size_t offset, std::uint64_t v);
  Bytes take() { return std::move(out_); }
  const Bytes& bytes() const { return out_; }

 private:
  Bytes out_;
};

// Bounds-checked decoder; running off the end is a kTruncated error.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::span<const std::uint8_t> raw(std::size_t n);
  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

Bytes serialize_model(const ForestModel& model);
void serialize_model(const ForestModel& model, std::ostream& out);
ForestModel deserialize_model(std::span<const std::uint8_t> bytes);
ForestModel deserialize_model(std::istream& in);

void write_model_file(const ForestModel& model, const std::string& path);
ForestModel read_model_file(const std::string& path);

// One tree_block, including its length prefix.
Bytes serialize_tree_block(const ForestTree& tree, Index label_dim);

struct TreeSet {
  Index d_x = 0;
  Index d_y = 0;
  std::vector<ForestTree> trees;
};

inline constexpr std::size_t kTreeSetHeaderBytes = 16;

Bytes serialize_tree_set(std::span<const ForestTree> trees, Index d_x,
                         Index d_y);
TreeSet deserialize_tree_set(std::span<const std::uint8_t> bytes);

// Byte accounting of a serialized model.
struct ModelLayout {
  std::size_t header_bytes = 0;  // magic + version
  std::size_t config_bytes = 0;  // including its length prefix
  std::size_t count_bytes = 0;   // tree count field
  std::vector<std::size_t> tree_block_bytes;
  std::size_t total() const;
};

ModelLayout model_layout(const ForestModel& model);

}  // namespace xforest
