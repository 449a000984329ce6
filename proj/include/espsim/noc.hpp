/*
 * Copyright 2026 The espsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "espsim/config.hpp"
#include "espsim/message.hpp"

namespace espsim {

enum class FlitKind : std::uint8_t { Head, Body, Tail, HeadTail };

std::string_view to_string(FlitKind k);

inline bool is_head(FlitKind k) { return k == FlitKind::Head || k == FlitKind::HeadTail; }
inline bool is_tail(FlitKind k) { return k == FlitKind::Tail || k == FlitKind::HeadTail; }

struct Packet {
  std::uint64_t id = 0;
  PlaneId plane = 0;
  MessageClass msg_class = MessageClass::CohReq;
  Position src;
  Position dst;
  Message msg;
  Cycle queued_cycle = 0;  // handed to the tile's network interface
  Cycle inject_cycle = 0;  // head flit entered the source router
  Cycle eject_cycle = 0;   // tail flit left the destination router

  int length_flits() const { return 1 + static_cast<int>(msg.data.size()); }
  int hops() const { return manhattan(src, dst); }
};

/// Port the router downstream of `current` (through `out`) will use for a
/// packet headed to `dst`; computed while the current router arbitrates.
inline Port route_lookahead(Position current, Port out, Position dst) {
  return route_xy(neighbor(current, out), dst);
}

/// Builds a packet for `msg`, choosing the plane from `planes`.
Packet make_packet(const PlaneMap& planes, Position src, Position dst, Message msg);

struct Flit {
  std::uint64_t packet = 0;
  FlitKind kind = FlitKind::HeadTail;
  int seq = 0;
  // Header state; meaningful on head flits only.
  Position dst;
  Port precomputed_port = Port::Local;
};

/// One flit crossing one router output in one cycle.
struct LinkEvent {
  Cycle cycle = 0;
  Position router;
  PlaneId plane = 0;
  Port port = Port::Local;
  FlitKind kind = FlitKind::HeadTail;
  Position src;
  Position dst;
  std::uint64_t packet = 0;
};

struct PlaneCounters {
  std::uint64_t packets_injected = 0;
  std::uint64_t packets_ejected = 0;
  std::uint64_t flits_injected = 0;
  std::uint64_t flits_ejected = 0;
  std::uint64_t link_traversals = 0;  // router-to-router hops
};

/// Multi-plane 2D mesh with wormhole switching, one input queue per port and
/// plane, look-ahead XY routing and round-robin output arbitration.
///
/// Timing: a head flit that enters its source router in cycle t leaves the
/// destination router's local port in cycle t + hops; the rest of the packet
/// follows one flit per cycle.
class Noc {
 public:
  Noc(int rows, int cols, const NocParams& params, PlaneMap planes = PlaneMap::for_config(NocParams{}));
  Noc(const ValidatedSoC& soc);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int planes() const { return planes_count_; }
  const PlaneMap& plane_map() const { return plane_map_; }

  /// Whether the tile's network interface can take another packet on `plane`.
  bool can_inject(Position tile, PlaneId plane) const;
  /// Queues a packet for injection. Returns false (and leaves the packet
  /// untouched) if the interface is full; throws SimError on a plane that
  /// does not match the packet's message class.
  bool inject_packet(Position tile, Packet& pkt, Cycle now);

  /// Advances every router by one cycle.
  void step(Cycle now);

  /// Removes and returns all reassembled packets at the tile, in plane order
  /// then arrival order.
  std::vector<Packet> drain_ejected(Position tile);
  const Packet* peek_ejected(Position tile, PlaneId plane) const;
  Packet pop_ejected(Position tile, PlaneId plane);

  /// No flit in any router or interface (reassembled packets excluded).
  bool idle() const { return flits_in_network_ == 0 && outbound_packets_ == 0; }
  std::uint64_t flits_in_network() const { return flits_in_network_; }
  std::uint64_t pending_ejected() const { return ejected_waiting_; }

  const PlaneCounters& counters(PlaneId plane) const { return counters_[static_cast<std::size_t>(plane - 1)]; }
  std::uint64_t link_flits(Position router, PlaneId plane, Port port) const;
  std::uint64_t progress() const { return progress_; }

  void set_link_observer(std::function<void(const LinkEvent&)> fn) { observer_ = std::move(fn); }

  /// Occupancy of one router input queue; for tests.
  std::size_t queue_occupancy(Position router, PlaneId plane, Port input) const;

 private:
  struct PlaneRouter {
    std::array<std::deque<Flit>, kNumPorts> in;
    std::array<int, kNumPorts> owner{-1, -1, -1, -1, -1};
    std::array<int, kNumPorts> rr{kNumPorts - 1, kNumPorts - 1, kNumPorts - 1, kNumPorts - 1, kNumPorts - 1};
    std::array<std::uint64_t, kNumPorts> out_flits{};
  };
  struct NetIf {
    std::deque<std::uint64_t> outbound;  // packet ids
    int next_flit = 0;               // of outbound.front()
    std::uint64_t reassembling = 0;  // packet id being received, 0 if none
    std::deque<Packet> completed;
  };
  struct Move {
    int router;
    int plane;
    int input;
    int output;
  };

  std::size_t idx(int router, int plane) const {
    return static_cast<std::size_t>(router) * static_cast<std::size_t>(planes_count_) + static_cast<std::size_t>(plane);
  }
  int router_id(Position p) const { return p.row * cols_ + p.col; }
  Position position(int router) const { return {router / cols_, router % cols_}; }
  bool downstream_ready(int router, int plane, int output, const Flit& f) const;

  int rows_;
  int cols_;
  int planes_count_;
  NocParams params_;
  PlaneMap plane_map_;
  RoutingTables routes_;
  std::vector<PlaneRouter> routers_;  // [router][plane]
  std::vector<NetIf> nis_;            // [tile][plane]
  std::unordered_map<std::uint64_t, Packet> in_flight_;
  std::vector<PlaneCounters> counters_;
  std::vector<Move> moves_;
  std::uint64_t next_packet_id_ = 1;
  std::uint64_t flits_in_network_ = 0;
  std::uint64_t outbound_packets_ = 0;
  std::uint64_t ejected_waiting_ = 0;
  std::uint64_t progress_ = 0;
  std::function<void(const LinkEvent&)> observer_;
};

}  // namespace espsim
