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

// Master/worker forest training.
//
// Rank 0 is the master, ranks 1..P are workers. Every worker reads the full
// dataset, trains a contiguous range of tree indices and sends exactly one
// message to the master: its serialized tree set. The master assembles the
// forest by tree index. With the same config the result is byte-identical
// to single-process training.
//
// Wire frame (little-endian):
//   "DXMW" u32:sender_rank u64:payload_len payload
//
// Roster file: one "rank host:port" line per peer, '#' starts a comment.

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xforest/forest.hpp"
#include "xforest/model_io.hpp"

namespace xforest {

inline constexpr char kWireMagic[4] = {'D', 'X', 'M', 'W'};
inline constexpr std::size_t kWireHeaderBytes = 16;

class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, bool retriable)
      : std::runtime_error(what), retriable_(retriable) {}
  bool retriable() const { return retriable_; }

 private:
  bool retriable_;
};

// Master-side protocol violations: duplicate or missing workers, foreign
// payloads.
class GatherError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Message {
  std::uint32_t peer = 0;
  Bytes payload;
};

Bytes encode_frame(std::uint32_t sender, std::span<const std::uint8_t> payload);
Message decode_frame(std::span<const std::uint8_t> frame);

// Duplex channel. Delivery is intact and ordered per peer.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::uint32_t rank() const = 0;
  virtual void send(std::uint32_t peer, std::span<const std::uint8_t> payload) = 0;
  // nullopt on timeout.
  virtual std::optional<Message> receive(std::chrono::milliseconds timeout) = 0;
};

// In-process transport: every rank gets an endpoint over shared queues.
// Frames are encoded and decoded exactly as on a socket.
class LoopbackHub {
 public:
  explicit LoopbackHub(std::uint32_t ranks);
  ~LoopbackHub();
  std::unique_ptr<Transport> endpoint(std::uint32_t rank);

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

struct PeerAddress {
  std::uint32_t rank = 0;
  std::string host;
  std::uint16_t port = 0;
};

std::vector<PeerAddress> parse_roster(const std::string& text);
std::vector<PeerAddress> read_roster_file(const std::string& path);

// TCP transport. The master listens on its roster address (port 0 picks a
// free port, see port()); workers connect to the master on first send.
class SocketTransport : public Transport {
 public:
  static std::unique_ptr<SocketTransport> listen(std::uint32_t rank,
                                                 const PeerAddress& bind);
  static std::unique_ptr<SocketTransport> client(
      std::uint32_t rank, std::vector<PeerAddress> roster);
  ~SocketTransport() override;

  std::uint32_t rank() const override { return rank_; }
  std::uint16_t port() const { return port_; }
  void send(std::uint32_t peer, std::span<const std::uint8_t> payload) override;
  std::optional<Message> receive(std::chrono::milliseconds timeout) override;

 private:
  SocketTransport() = default;
  int connection_to(std::uint32_t peer);

  std::uint32_t rank_ = 0;
  std::uint16_t port_ = 0;
  int listen_fd_ = -1;
  std::vector<PeerAddress> roster_;
  std::map<std::uint32_t, int> outgoing_;
  std::vector<int> incoming_;
  std::mutex mu_;
};

enum class Role { kMaster, kWorker };

struct ClusterConfig {
  std::uint32_t workers = 1;  // P
  Role role = Role::kMaster;
  std::uint32_t rank = 0;
  std::vector<PeerAddress> roster;
  int retries = 3;
  std::chrono::milliseconds receive_timeout{30000};

  void validate(std::uint32_t m_F) const;
};

// Contiguous tree range [first, last) of worker `rank` (1-based).
std::pair<std::uint64_t, std::uint64_t> worker_tree_range(std::uint32_t rank,
                                                          std::uint32_t workers,
                                                          std::uint32_t m_F);

struct PeerTraffic {
  std::uint64_t messages = 0;
  std::uint64_t payload_bytes = 0;
  std::uint64_t wire_bytes = 0;  // payload plus frame header
};

struct CommStats {
  std::map<std::uint32_t, PeerTraffic> peers;
  std::map<std::string, double> phase_seconds;

  std::uint64_t total_messages() const;
  std::uint64_t total_payload_bytes() const;
  std::uint64_t total_wire_bytes() const;
};

struct WorkerResult {
  CommStats stats;
  std::uint64_t first_tree = 0;
  std::uint64_t last_tree = 0;
  std::size_t payload_bytes = 0;
  std::vector<std::size_t> tree_block_bytes;
};

WorkerResult run_worker(const Dataset& data, const TrainConfig& cfg,
                        const ClusterConfig& cluster, Transport& transport,
                        std::size_t threads = 1);

struct MasterResult {
  ForestModel model;
  CommStats stats;
  std::vector<std::size_t> tree_block_bytes;  // by tree index
};

MasterResult run_master(const TrainConfig& cfg, const ClusterConfig& cluster,
                        Transport& transport);

struct CommReport {
  std::uint32_t workers = 0;
  std::uint64_t messages = 0;
  std::uint64_t predicted_messages = 0;  // P
  std::uint64_t bytes = 0;
  std::uint64_t predicted_bytes = 0;  // sum of tree blocks + set headers
  std::uint64_t tree_block_bytes = 0;
  std::uint64_t set_header_bytes = 0;
  std::uint64_t wire_header_bytes = 0;
  // Model file bytes minus the tree blocks.
  std::uint64_t model_bytes = 0;
  std::uint64_t model_container_bytes = 0;
  bool messages_match = false;
  bool bytes_match = false;

  bool consistent() const { return messages_match && bytes_match; }
  std::string to_json() const;
};

CommReport comm_report(const CommStats& stats, std::uint32_t workers,
                       std::span<const std::size_t> tree_block_bytes,
                       std::uint64_t model_bytes);

}  // namespace xforest
