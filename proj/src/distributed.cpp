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

#include "xforest/distributed.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace xforest {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string errno_text(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

}  // namespace

Bytes encode_frame(std::uint32_t sender,
                   std::span<const std::uint8_t> payload) {
  ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(kWireMagic), 4});
  w.u32(sender);
  w.u64(payload.size());
  w.raw(payload);
  return w.take();
}

Message decode_frame(std::span<const std::uint8_t> frame) {
  if (frame.size() < kWireHeaderBytes) {
    throw TransportError("frame shorter than its header", false);
  }
  if (std::memcmp(frame.data(), kWireMagic, 4) != 0) {
    throw TransportError("bad frame magic", false);
  }
  ByteReader r(frame.subspan(4));
  Message m;
  m.peer = r.u32();
  const std::uint64_t len = r.u64();
  if (len != frame.size() - kWireHeaderBytes) {
    throw TransportError("frame length " + std::to_string(len) +
                             " does not match " +
                             std::to_string(frame.size() - kWireHeaderBytes) +
                             " payload bytes",
                         false);
  }
  const auto body = r.raw(len);
  m.payload.assign(body.begin(), body.end());
  return m;
}

// ---------------------------------------------------------------- loopback

struct LoopbackHub::Impl {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::deque<Bytes>> inbox;
};

namespace {

class LoopbackEndpoint : public Transport {
 public:
  LoopbackEndpoint(std::shared_ptr<LoopbackHub::Impl> hub, std::uint32_t rank)
      : hub_(std::move(hub)), rank_(rank) {}

  std::uint32_t rank() const override { return rank_; }

  void send(std::uint32_t peer,
            std::span<const std::uint8_t> payload) override {
    Bytes frame = encode_frame(rank_, payload);
    {
      std::lock_guard lock(hub_->mu);
      if (peer >= hub_->inbox.size()) {
        throw TransportError("no such peer " + std::to_string(peer), false);
      }
      hub_->inbox[peer].push_back(std::move(frame));
    }
    hub_->cv.notify_all();
  }

  std::optional<Message> receive(std::chrono::milliseconds timeout) override {
    std::unique_lock lock(hub_->mu);
    auto& box = hub_->inbox[rank_];
    if (!hub_->cv.wait_for(lock, timeout, [&] { return !box.empty(); })) {
      return std::nullopt;
    }
    Bytes frame = std::move(box.front());
    box.pop_front();
    lock.unlock();
    return decode_frame(frame);
  }

 private:
  std::shared_ptr<LoopbackHub::Impl> hub_;
  std::uint32_t rank_;
};

}  // namespace

LoopbackHub::LoopbackHub(std::uint32_t ranks) : impl_(std::make_shared<Impl>()) {
  impl_->inbox.resize(ranks);
}

LoopbackHub::~LoopbackHub() = default;

std::unique_ptr<Transport> LoopbackHub::endpoint(std::uint32_t rank) {
  if (rank >= impl_->inbox.size()) {
    throw std::invalid_argument("loopback rank out of range");
  }
  return std::make_unique<LoopbackEndpoint>(impl_, rank);
}

// ------------------------------------------------------------------ roster

std::vector<PeerAddress> parse_roster(const std::string& text) {
  std::vector<PeerAddress> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::set<std::uint32_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream fields(line);
    std::string rank_text, address, extra;
    if (!(fields >> rank_text)) continue;
    auto fail = [&](const std::string& why) {
      throw std::invalid_argument("roster line " + std::to_string(line_no) +
                                  ": " + why);
    };
    if (!(fields >> address) || (fields >> extra)) {
      fail("expected \"rank host:port\"");
    }
    PeerAddress peer;
    auto [p, ec] = std::from_chars(rank_text.data(),
                                   rank_text.data() + rank_text.size(), peer.rank);
    if (ec != std::errc() || p != rank_text.data() + rank_text.size()) {
      fail("bad rank '" + rank_text + "'");
    }
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0) fail("bad address '" + address + "'");
    peer.host = address.substr(0, colon);
    const std::string port_text = address.substr(colon + 1);
    auto [q, ec2] = std::from_chars(port_text.data(),
                                    port_text.data() + port_text.size(), peer.port);
    if (ec2 != std::errc() || q != port_text.data() + port_text.size()) {
      fail("bad port '" + port_text + "'");
    }
    if (!seen.insert(peer.rank).second) {
      fail("duplicate rank " + std::to_string(peer.rank));
    }
    out.push_back(std::move(peer));
  }
  std::sort(out.begin(), out.end(),
            [](const PeerAddress& a, const PeerAddress& b) { return a.rank < b.rank; });
  return out;
}

std::vector<PeerAddress> read_roster_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open roster " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_roster(text.str());
}

// ------------------------------------------------------------------ socket

namespace {

void write_all(int fd, std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n =
        ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("send"), true);
    }
    done += static_cast<std::size_t>(n);
  }
}

// Returns false on a clean EOF before the first byte.
bool read_all(int fd, std::uint8_t* out, std::size_t size) {
  std::size_t done = 0;
  while (done < size) {
    const ssize_t n = ::recv(fd, out + done, size - done, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("recv"), true);
    }
    if (n == 0) {
      if (done == 0) return false;
      throw TransportError("connection closed mid-frame", true);
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

// Reads one frame; nullopt when the peer closed the connection.
std::optional<Message> read_frame(int fd) {
  Bytes frame(kWireHeaderBytes);
  if (!read_all(fd, frame.data(), kWireHeaderBytes)) return std::nullopt;
  if (std::memcmp(frame.data(), kWireMagic, 4) != 0) {
    throw TransportError("bad frame magic", false);
  }
  ByteReader r(std::span<const std::uint8_t>(frame).subspan(8));
  const std::uint64_t len = r.u64();
  frame.resize(kWireHeaderBytes + len);
  if (len > 0 && !read_all(fd, frame.data() + kWireHeaderBytes, len)) {
    throw TransportError("connection closed mid-frame", true);
  }
  return decode_frame(frame);
}

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(),
                               service.c_str(), &hints, &res);
  if (rc != 0) {
    throw TransportError("resolve " + host + ":" + service + ": " +
                             ::gai_strerror(rc),
                         true);
  }
  return res;
}

}  // namespace

std::unique_ptr<SocketTransport> SocketTransport::listen(
    std::uint32_t rank, const PeerAddress& bind) {
  std::unique_ptr<SocketTransport> t(new SocketTransport());
  t->rank_ = rank;
  addrinfo* res = resolve(bind.host, bind.port, true);
  int fd = -1;
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      break;
    }
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    throw TransportError(errno_text("listen on " + bind.host + ":" +
                                    std::to_string(bind.port)),
                         false);
  }
  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  if (addr.ss_family == AF_INET) {
    t->port_ = ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  } else if (addr.ss_family == AF_INET6) {
    t->port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  }
  t->listen_fd_ = fd;
  return t;
}

std::unique_ptr<SocketTransport> SocketTransport::client(
    std::uint32_t rank, std::vector<PeerAddress> roster) {
  std::unique_ptr<SocketTransport> t(new SocketTransport());
  t->rank_ = rank;
  t->roster_ = std::move(roster);
  return t;
}

SocketTransport::~SocketTransport() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
  for (const auto& [peer, fd] : outgoing_) ::close(fd);
  for (int fd : incoming_) ::close(fd);
}

int SocketTransport::connection_to(std::uint32_t peer) {
  if (const auto it = outgoing_.find(peer); it != outgoing_.end()) {
    return it->second;
  }
  const auto addr = std::find_if(roster_.begin(), roster_.end(),
                                 [&](const PeerAddress& a) { return a.rank == peer; });
  if (addr == roster_.end()) {
    throw TransportError("rank " + std::to_string(peer) + " not in roster",
                         false);
  }
  addrinfo* res = resolve(addr->host, addr->port, false);
  int fd = -1;
  int last_errno = 0;
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    last_errno = errno;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    errno = last_errno;
    throw TransportError(errno_text("connect to rank " + std::to_string(peer) +
                                    " at " + addr->host + ":" +
                                    std::to_string(addr->port)),
                         true);
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  outgoing_[peer] = fd;
  return fd;
}

void SocketTransport::send(std::uint32_t peer,
                           std::span<const std::uint8_t> payload) {
  std::lock_guard lock(mu_);
  const int fd = connection_to(peer);
  try {
    write_all(fd, encode_frame(rank_, payload));
  } catch (const TransportError&) {
    ::close(fd);
    outgoing_.erase(peer);
    throw;
  }
}

std::optional<Message> SocketTransport::receive(
    std::chrono::milliseconds timeout) {
  std::lock_guard lock(mu_);
  const auto deadline = Clock::now() + timeout;
  while (true) {
    std::vector<pollfd> fds;
    if (listen_fd_ >= 0) fds.push_back({listen_fd_, POLLIN, 0});
    for (int fd : incoming_) fds.push_back({fd, POLLIN, 0});
    for (const auto& [peer, fd] : outgoing_) fds.push_back({fd, POLLIN, 0});
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    const int wait_ms = static_cast<int>(std::max<long long>(left.count(), 0));
    const int rc = ::poll(fds.data(), fds.size(), wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("poll"), true);
    }
    if (rc == 0) return std::nullopt;
    for (const pollfd& p : fds) {
      if (p.revents == 0) continue;
      if (p.fd == listen_fd_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd >= 0) incoming_.push_back(fd);
        continue;
      }
      std::optional<Message> m = read_frame(p.fd);
      if (m) return m;
      ::close(p.fd);
      std::erase(incoming_, p.fd);
      std::erase_if(outgoing_, [&](const auto& kv) { return kv.second == p.fd; });
    }
  }
}

// -------------------------------------------------------------- protocol

void ClusterConfig::validate(std::uint32_t m_F) const {
  if (workers < 1) throw std::invalid_argument("cluster needs P >= 1 workers");
  if (m_F < workers) {
    throw std::invalid_argument("m_F (" + std::to_string(m_F) +
                                ") must be at least P (" +
                                std::to_string(workers) + ")");
  }
  if (role == Role::kMaster && rank != 0) {
    throw std::invalid_argument("master must have rank 0");
  }
  if (role == Role::kWorker && (rank < 1 || rank > workers)) {
    throw std::invalid_argument("worker rank must be in 1.." +
                                std::to_string(workers));
  }
  if (retries < 0) throw std::invalid_argument("retries must be >= 0");
}

std::pair<std::uint64_t, std::uint64_t> worker_tree_range(
    std::uint32_t rank, std::uint32_t workers, std::uint32_t m_F) {
  if (workers == 0 || rank < 1 || rank > workers) {
    throw std::invalid_argument("worker rank out of range");
  }
  const std::uint64_t m = m_F;
  return {(rank - 1) * m / workers, rank * m / workers};
}

std::uint64_t CommStats::total_messages() const {
  std::uint64_t s = 0;
  for (const auto& [peer, t] : peers) s += t.messages;
  return s;
}

std::uint64_t CommStats::total_payload_bytes() const {
  std::uint64_t s = 0;
  for (const auto& [peer, t] : peers) s += t.payload_bytes;
  return s;
}

std::uint64_t CommStats::total_wire_bytes() const {
  std::uint64_t s = 0;
  for (const auto& [peer, t] : peers) s += t.wire_bytes;
  return s;
}

WorkerResult run_worker(const Dataset& data, const TrainConfig& cfg,
                        const ClusterConfig& cluster, Transport& transport,
                        std::size_t threads) {
  if (cluster.role != Role::kWorker) {
    throw std::invalid_argument("run_worker requires the worker role");
  }
  cluster.validate(cfg.m_F);
  WorkerResult out;
  std::tie(out.first_tree, out.last_tree) =
      worker_tree_range(cluster.rank, cluster.workers, cfg.m_F);

  auto start = Clock::now();
  ForestTraining trained =
      train_trees(data, cfg, out.first_tree, out.last_tree, threads);
  out.stats.phase_seconds["train"] = seconds_since(start);

  const Bytes payload = serialize_tree_set(trained.model.trees,
                                           trained.model.d_x, trained.model.d_y);
  for (const ForestTree& t : trained.model.trees) {
    out.tree_block_bytes.push_back(
        serialize_tree_block(t, trained.model.d_y).size());
  }
  out.payload_bytes = payload.size();

  start = Clock::now();
  for (int attempt = 0;; ++attempt) {
    try {
      transport.send(0, payload);
      break;
    } catch (const TransportError& e) {
      if (!e.retriable() || attempt >= cluster.retries) {
        throw TransportError("worker " + std::to_string(cluster.rank) +
                                 ": master unreachable after " +
                                 std::to_string(attempt + 1) +
                                 " attempt(s): " + e.what(),
                             false);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
    }
  }
  out.stats.phase_seconds["send"] = seconds_since(start);
  PeerTraffic& master = out.stats.peers[0];
  master.messages = 1;
  master.payload_bytes = payload.size();
  master.wire_bytes = payload.size() + kWireHeaderBytes;
  return out;
}

MasterResult run_master(const TrainConfig& cfg, const ClusterConfig& cluster,
                        Transport& transport) {
  if (cluster.role != Role::kMaster) {
    throw std::invalid_argument("run_master requires the master role");
  }
  cluster.validate(cfg.m_F);
  MasterResult out;

  auto start = Clock::now();
  std::map<std::uint32_t, Bytes> payloads;
  while (payloads.size() < cluster.workers) {
    std::optional<Message> m = transport.receive(cluster.receive_timeout);
    if (!m) {
      std::string missing;
      for (std::uint32_t w = 1; w <= cluster.workers; ++w) {
        if (!payloads.contains(w)) missing += " " + std::to_string(w);
      }
      throw GatherError("timed out waiting for worker(s):" + missing);
    }
    if (m->peer < 1 || m->peer > cluster.workers) {
      throw GatherError("message from unexpected rank " +
                        std::to_string(m->peer));
    }
    if (payloads.contains(m->peer)) {
      throw GatherError("duplicate report from worker " +
                        std::to_string(m->peer));
    }
    PeerTraffic& t = out.stats.peers[m->peer];
    t.messages += 1;
    t.payload_bytes += m->payload.size();
    t.wire_bytes += m->payload.size() + kWireHeaderBytes;
    payloads.emplace(m->peer, std::move(m->payload));
  }
  const double gather = seconds_since(start);
  out.stats.phase_seconds["gather"] = gather;

  start = Clock::now();
  out.model.cfg = cfg;
  std::optional<std::pair<Index, Index>> dims;
  for (auto& [rank, bytes] : payloads) {
    TreeSet set;
    try {
      set = deserialize_tree_set(bytes);
    } catch (const ModelFormatError& e) {
      throw ModelFormatError(e.kind(), "worker " + std::to_string(rank) +
                                           ": " + e.what());
    }
    if (!dims) dims.emplace(set.d_x, set.d_y);
    if (*dims != std::pair(set.d_x, set.d_y)) {
      throw GatherError("worker " + std::to_string(rank) +
                        " trained on different data dimensions");
    }
    const auto [first, last] =
        worker_tree_range(rank, cluster.workers, cfg.m_F);
    if (set.trees.size() != last - first) {
      throw GatherError("worker " + std::to_string(rank) + " sent " +
                        std::to_string(set.trees.size()) + " trees, expected " +
                        std::to_string(last - first));
    }
    for (ForestTree& t : set.trees) out.model.trees.push_back(std::move(t));
  }
  std::stable_sort(out.model.trees.begin(), out.model.trees.end(),
                   [](const ForestTree& a, const ForestTree& b) {
                     return a.tree_index < b.tree_index;
                   });
  for (std::size_t i = 0; i < out.model.trees.size(); ++i) {
    if (out.model.trees[i].tree_index != i) {
      throw GatherError("gathered tree indices do not cover 0.." +
                        std::to_string(cfg.m_F - 1));
    }
  }
  out.model.d_x = dims->first;
  out.model.d_y = dims->second;
  for (const ForestTree& t : out.model.trees) {
    out.tree_block_bytes.push_back(serialize_tree_block(t, out.model.d_y).size());
  }
  const double reduce = seconds_since(start);
  out.stats.phase_seconds["reduce"] = reduce;
  out.stats.phase_seconds["total_excluding_reduce"] = gather;
  out.stats.phase_seconds["total_including_reduce"] = gather + reduce;
  return out;
}

CommReport comm_report(const CommStats& stats, std::uint32_t workers,
                       std::span<const std::size_t> tree_block_bytes,
                       std::uint64_t model_bytes) {
  CommReport r;
  r.workers = workers;
  r.messages = stats.total_messages();
  r.predicted_messages = workers;
  r.bytes = stats.total_payload_bytes();
  for (std::size_t b : tree_block_bytes) r.tree_block_bytes += b;
  r.set_header_bytes = static_cast<std::uint64_t>(workers) * kTreeSetHeaderBytes;
  r.predicted_bytes = r.tree_block_bytes + r.set_header_bytes;
  r.wire_header_bytes = stats.total_wire_bytes() - r.bytes;
  r.model_bytes = model_bytes;
  r.model_container_bytes =
      model_bytes >= r.tree_block_bytes ? model_bytes - r.tree_block_bytes : 0;
  r.messages_match = r.messages == r.predicted_messages;
  r.bytes_match = r.bytes == r.predicted_bytes;
  return r;
}

std::string CommReport::to_json() const {
  nlohmann::json j = {
      {"workers", workers},
      {"messages", messages},
      {"predicted_messages", predicted_messages},
      {"bytes", bytes},
      {"predicted_bytes", predicted_bytes},
      {"tree_block_bytes", tree_block_bytes},
      {"set_header_bytes", set_header_bytes},
      {"wire_header_bytes", wire_header_bytes},
      {"model_bytes", model_bytes},
      {"model_container_bytes", model_container_bytes},
      {"messages_match", messages_match},
      {"bytes_match", bytes_match},
  };
  return j.dump();
}

}  // namespace xforest
