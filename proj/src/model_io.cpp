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

#include "xforest/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

namespace xforest {

namespace {

using Kind = ModelFormatError::Kind;

constexpr std::uint8_t kLeafTag = 0;
constexpr std::uint8_t kInternalTag = 1;

// Smallest encodings, used to reject counts that cannot fit in what is left.
constexpr std::size_t kMinNodeBytes = 1 + 4;
constexpr std::size_t kEntryBytes = 4 + 8;

void write_spec(ByteWriter& w, const ProjectionSpec& s) {
  w.u32(s.out_dim);
  w.u64(s.seed_index);
  w.u64(s.seed_sign);
}

ProjectionSpec read_spec(ByteReader& r) {
  ProjectionSpec s;
  s.out_dim = r.u32();
  s.seed_index = r.u64();
  s.seed_sign = r.u64();
  if (s.out_dim == 0) throw ModelFormatError(Kind::kCorrupt, "zero out_dim");
  return s;
}

void write_svec(ByteWriter& w, const SparseVec& v) {
  w.u32(static_cast<std::uint32_t>(v.nnz()));
  for (const Entry& e : v) {
    w.u32(e.col);
    w.f64(e.val);
  }
}

SparseVec read_svec(ByteReader& r, Index dim) {
  const std::uint32_t nnz = r.u32();
  if (static_cast<std::size_t>(nnz) * kEntryBytes > r.remaining()) {
    throw ModelFormatError(Kind::kTruncated, "sparse vector runs past end");
  }
  std::vector<Entry> entries(nnz);
  for (Entry& e : entries) {
    e.col = r.u32();
    e.val = r.f64();
  }
  try {
    return SparseVec(dim, std::move(entries));
  } catch (const std::invalid_argument& ex) {
    throw ModelFormatError(Kind::kCorrupt, ex.what());
  }
}

std::size_t count_nodes(const TreeNode& n) {
  std::size_t c = 1;
  for (const TreeNode& ch : n.children) c += count_nodes(ch);
  return c;
}

void write_node(ByteWriter& w, const TreeNode& n) {
  if (n.is_leaf()) {
    w.u8(kLeafTag);
    write_svec(w, n.y_hat);
    return;
  }
  w.u8(kInternalTag);
  w.u32(static_cast<std::uint32_t>(n.classifier.centroids.size()));
  for (const SparseVec& c : n.classifier.centroids) write_svec(w, c);
  for (const TreeNode& ch : n.children) write_node(w, ch);
}

struct NodeReader {
  ByteReader& r;
  Index feature_dim;
  Index label_dim;
  std::uint64_t budget;  // nodes still allowed by node_count

  TreeNode read() {
    if (budget == 0) {
      throw ModelFormatError(Kind::kCorrupt, "more nodes than node_count");
    }
    --budget;
    TreeNode n;
    const std::uint8_t tag = r.u8();
    if (tag == kLeafTag) {
      n.y_hat = read_svec(r, label_dim);
      return n;
    }
    if (tag != kInternalTag) {
      throw ModelFormatError(Kind::kCorrupt,
                             "unknown node tag " + std::to_string(tag));
    }
    const std::uint32_t k = r.u32();
    if (k < 2 || static_cast<std::uint64_t>(k) > budget) {
      throw ModelFormatError(Kind::kCorrupt,
                             "bad branching factor " + std::to_string(k));
    }
    std::vector<SparseVec> centroids;
    centroids.reserve(k);
    for (std::uint32_t i = 0; i < k; ++i) {
      centroids.push_back(read_svec(r, feature_dim));
    }
    n.classifier = NodeClassifier::from_centroids(std::move(centroids));
    n.children.reserve(k);
    for (std::uint32_t i = 0; i < k; ++i) n.children.push_back(read());
    return n;
  }
};

void write_tree_block(ByteWriter& w, const ForestTree& t, Index label_dim) {
  const std::size_t len_at = w.size();
  w.u64(0);
  w.u64(t.tree_index);
  write_spec(w, t.seeds.features);
  write_spec(w, t.seeds.labels);
  w.u64(t.seeds.node_seed);
  w.u32(label_dim);
  w.u64(count_nodes(t.root));
  write_node(w, t.root);
  w.patch_u64(len_at, w.size() - len_at - 8);
}

ForestTree read_tree_block(ByteReader& r, Index* label_dim_out) {
  const std::uint64_t len = r.u64();
  if (len > r.remaining()) {
    throw ModelFormatError(Kind::kTruncated, "tree block runs past end");
  }
  const std::size_t start = r.position();
  ForestTree t;
  t.tree_index = r.u64();
  t.seeds.features = read_spec(r);
  t.seeds.labels = read_spec(r);
  t.seeds.node_seed = r.u64();
  const Index label_dim = r.u32();
  if (label_dim == 0) throw ModelFormatError(Kind::kCorrupt, "zero label dim");
  const std::uint64_t node_count = r.u64();
  if (node_count == 0 || node_count > r.remaining() / kMinNodeBytes) {
    throw ModelFormatError(Kind::kCorrupt, "implausible node count");
  }
  NodeReader nodes{r, t.seeds.features.out_dim, label_dim, node_count};
  t.root = nodes.read();
  if (nodes.budget != 0) {
    throw ModelFormatError(Kind::kCorrupt, "fewer nodes than node_count");
  }
  if (r.position() - start != len) {
    throw ModelFormatError(Kind::kCorrupt, "tree block length mismatch");
  }
  if (label_dim_out != nullptr) *label_dim_out = label_dim;
  return t;
}

void write_config(ByteWriter& w, const ForestModel& m) {
  const std::size_t len_at = w.size();
  w.u32(0);
  const TrainConfig& c = m.cfg;
  w.u32(c.k);
  w.u32(c.n_leaf);
  w.u32(c.n_s);
  w.u32(c.proj_dx);
  w.u32(c.proj_dy);
  w.u32(c.proj_cap);
  w.u8(static_cast<std::uint8_t>(c.dx_rule));
  w.u32(c.kmeans_iters);
  w.u64(c.master_seed);
  w.u32(c.m_F);
  w.u32(m.d_x);
  w.u32(m.d_y);
  w.patch_u32(len_at, static_cast<std::uint32_t>(w.size() - len_at - 4));
}

void read_config(ByteReader& r, ForestModel& m) {
  const std::uint32_t len = r.u32();
  if (len > r.remaining()) {
    throw ModelFormatError(Kind::kTruncated, "config block runs past end");
  }
  const std::size_t start = r.position();
  TrainConfig& c = m.cfg;
  c.k = r.u32();
  c.n_leaf = r.u32();
  c.n_s = r.u32();
  c.proj_dx = r.u32();
  c.proj_dy = r.u32();
  c.proj_cap = r.u32();
  const std::uint8_t rule = r.u8();
  if (rule > 1) throw ModelFormatError(Kind::kCorrupt, "unknown dim rule");
  c.dx_rule = static_cast<ProjectionDimRule>(rule);
  c.kmeans_iters = r.u32();
  c.master_seed = r.u64();
  c.m_F = r.u32();
  m.d_x = r.u32();
  m.d_y = r.u32();
  if (r.position() - start != len) {
    throw ModelFormatError(Kind::kCorrupt, "config block length mismatch");
  }
}

void check_version(std::uint32_t version) {
  if (version != kModelFormatVersion) {
    throw ModelFormatError(Kind::kVersionMismatch,
                           "model format version " + std::to_string(version) +
                               ", expected " +
                               std::to_string(kModelFormatVersion));
  }
}

}  // namespace

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::raw(std::span<const std::uint8_t> bytes) {
  out_.insert(out_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::patch_u32(std::size_t offset, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out_[offset + i] = static_cast<std::uint8_t>(v >> (8 * i));
  }
}

void ByteWriter::patch_u64(std::size_t offset, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out_[offset + i] = static_cast<std::uint8_t>(v >> (8 * i));
  }
}

void ByteReader::need(std::size_t n) const {
  if (n > remaining()) {
    throw ModelFormatError(Kind::kTruncated,
                           "unexpected end of data at byte " +
                               std::to_string(pos_));
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return in_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n);
  auto s = in_.subspan(pos_, n);
  pos_ += n;
  return s;
}

Bytes serialize_model(const ForestModel& model) {
  ByteWriter w;
  for (char c : kModelMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(model.format_version);
  write_config(w, model);
  w.u32(static_cast<std::uint32_t>(model.trees.size()));
  for (const ForestTree& t : model.trees) write_tree_block(w, t, model.d_y);
  return w.take();
}

void serialize_model(const ForestModel& model, std::ostream& out) {
  const Bytes b = serialize_model(model);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
  if (!out) throw std::runtime_error("serialize_model: write failed");
}

ForestModel deserialize_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4) {
    throw ModelFormatError(Kind::kTruncated, "model shorter than magic");
  }
  const auto magic = r.raw(4);
  if (std::memcmp(magic.data(), kModelMagic, 4) != 0) {
    throw ModelFormatError(Kind::kBadMagic, "not a model file (bad magic)");
  }
  ForestModel m;
  m.format_version = r.u32();
  check_version(m.format_version);
  read_config(r, m);
  const std::uint32_t count = r.u32();
  if (count > r.remaining() / 8) {
    throw ModelFormatError(Kind::kTruncated, "tree count exceeds data");
  }
  m.trees.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Index label_dim = 0;
    m.trees.push_back(read_tree_block(r, &label_dim));
    if (label_dim != m.d_y) {
      throw ModelFormatError(Kind::kCorrupt, "tree label dim != model d_y");
    }
  }
  if (r.remaining() != 0) {
    throw ModelFormatError(Kind::kCorrupt, "trailing bytes after model");
  }
  return m;
}

ForestModel deserialize_model(std::istream& in) {
  const Bytes b((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  return deserialize_model(b);
}

void write_model_file(const ForestModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file " + path);
  serialize_model(model, out);
}

ForestModel read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  return deserialize_model(in);
}

Bytes serialize_tree_block(const ForestTree& tree, Index label_dim) {
  ByteWriter w;
  write_tree_block(w, tree, label_dim);
  return w.take();
}

Bytes serialize_tree_set(std::span<const ForestTree> trees, Index d_x,
                         Index d_y) {
  ByteWriter w;
  w.u32(kModelFormatVersion);
  w.u32(d_x);
  w.u32(d_y);
  w.u32(static_cast<std::uint32_t>(trees.size()));
  for (const ForestTree& t : trees) write_tree_block(w, t, d_y);
  return w.take();
}

TreeSet deserialize_tree_set(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  check_version(r.u32());
  TreeSet set;
  set.d_x = r.u32();
  set.d_y = r.u32();
  if (set.d_x == 0 || set.d_y == 0) {
    throw ModelFormatError(Kind::kCorrupt, "zero dimension in tree set");
  }
  const std::uint32_t count = r.u32();
  if (count > r.remaining() / 8) {
    throw ModelFormatError(Kind::kTruncated, "tree count exceeds data");
  }
  set.trees.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Index label_dim = 0;
    set.trees.push_back(read_tree_block(r, &label_dim));
    if (label_dim != set.d_y) {
      throw ModelFormatError(Kind::kCorrupt, "tree label dim != set d_y");
    }
  }
  if (r.remaining() != 0) {
    throw ModelFormatError(Kind::kCorrupt, "trailing bytes after tree set");
  }
  return set;
}

std::size_t ModelLayout::total() const {
  std::size_t t = header_bytes + config_bytes + count_bytes;
  for (std::size_t b : tree_block_bytes) t += b;
  return t;
}

ModelLayout model_layout(const ForestModel& model) {
  ModelLayout l;
  l.header_bytes = 8;
  ByteWriter w;
  write_config(w, model);
  l.config_bytes = w.size();
  l.count_bytes = 4;
  for (const ForestTree& t : model.trees) {
    l.tree_block_bytes.push_back(serialize_tree_block(t, model.d_y).size());
  }
  return l;
}

}  // namespace xforest
