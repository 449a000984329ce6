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

#include "espsim/noc.hpp"

namespace espsim {

namespace {

Port opposite(Port p) {
  switch (p) {
    case Port::North: return Port::South;
    case Port::South: return Port::North;
    case Port::East: return Port::West;
    case Port::West: return Port::East;
    case Port::Local: return Port::Local;
  }
  return Port::Local;
}

FlitKind kind_for(int seq, int length) {
  if (length == 1) return FlitKind::HeadTail;
  if (seq == 0) return FlitKind::Head;
  return seq == length - 1 ? FlitKind::Tail : FlitKind::Body;
}

}  // namespace

std::string_view to_string(FlitKind k) {
  switch (k) {
    case FlitKind::Head: return "HEAD";
    case FlitKind::Body: return "BODY";
    case FlitKind::Tail: return "TAIL";
    case FlitKind::HeadTail: return "HEADTAIL";
  }
  return "?";
}

Packet make_packet(const PlaneMap& planes, Position src, Position dst, Message msg) {
  Packet p;
  p.msg_class = class_of(msg.type);
  p.plane = planes.plane(p.msg_class);
  p.src = src;
  p.dst = dst;
  p.msg = std::move(msg);
  return p;
}

Noc::Noc(int rows, int cols, const NocParams& params, PlaneMap planes)
    : rows_(rows),
      cols_(cols),
      planes_count_(params.planes),
      params_(params),
      plane_map_(planes),
      routes_(RoutingTables::xy(rows, cols)),
      routers_(static_cast<std::size_t>(rows * cols * params.planes)),
      nis_(static_cast<std::size_t>(rows * cols * params.planes)),
      counters_(static_cast<std::size_t>(params.planes)) {}

Noc::Noc(const ValidatedSoC& soc)
    : Noc(soc.rows(), soc.cols(), soc.config().noc, PlaneMap::for_config(soc.config().noc)) {}

bool Noc::can_inject(Position tile, PlaneId plane) const {
  const auto& ni = nis_[idx(router_id(tile), plane - 1)];
  return ni.outbound.size() < static_cast<std::size_t>(params_.ni_outbound_packets);
}

bool Noc::inject_packet(Position tile, Packet& pkt, Cycle now) {
  if (pkt.plane != plane_map_.plane(pkt.msg_class) || pkt.msg_class != class_of(pkt.msg.type)) {
    throw SimError("PlaneMismatch: " + std::string(to_string(pkt.msg_class)) + " packet on plane " +
                   std::to_string(pkt.plane) + " from " + to_string(tile));
  }
  if (pkt.src != tile) throw SimError("packet source " + to_string(pkt.src) + " injected at " + to_string(tile));
  if (pkt.dst.row < 0 || pkt.dst.col < 0 || pkt.dst.row >= rows_ || pkt.dst.col >= cols_) {
    throw SimError("packet destination " + to_string(pkt.dst) + " outside the mesh");
  }
  if (!can_inject(tile, pkt.plane)) return false;
  pkt.id = next_packet_id_++;
  pkt.queued_cycle = now;
  auto& ni = nis_[idx(router_id(tile), pkt.plane - 1)];
  ni.outbound.push_back(pkt.id);
  in_flight_.emplace(pkt.id, pkt);
  ++outbound_packets_;
  return true;
}

bool Noc::downstream_ready(int router, int plane, int output, const Flit& f) const {
  if (output == static_cast<int>(Port::Local)) {
    const auto& ni = nis_[idx(router, plane)];
    if (!is_head(f.kind)) return true;
    const std::size_t used = ni.completed.size() + (ni.reassembling != 0 ? 1 : 0);
    return used < static_cast<std::size_t>(params_.ni_packet_slots);
  }
  const Position next = neighbor(position(router), static_cast<Port>(output));
  const auto& q = routers_[idx(router_id(next), plane)].in[static_cast<std::size_t>(opposite(static_cast<Port>(output)))];
  return q.size() < static_cast<std::size_t>(params_.input_queue_depth_flits);
}

void Noc::step(Cycle now) {
  const int n = rows_ * cols_;
  const auto depth = static_cast<std::size_t>(params_.input_queue_depth_flits);
  const auto local = static_cast<std::size_t>(Port::Local);

  // Network interfaces feed one flit per plane into the local input queue.
  for (int r = 0; r < n; ++r) {
    for (int p = 0; p < planes_count_; ++p) {
      auto& ni = nis_[idx(r, p)];
      if (ni.outbound.empty()) continue;
      auto& q = routers_[idx(r, p)].in[local];
      if (q.size() >= depth) continue;
      auto& pkt = in_flight_.at(ni.outbound.front());
      const int len = pkt.length_flits();
      Flit f;
      f.packet = pkt.id;
      f.seq = ni.next_flit;
      f.kind = kind_for(f.seq, len);
      f.dst = pkt.dst;
      if (is_head(f.kind)) {
        f.precomputed_port = routes_.lookup(pkt.src, pkt.dst);
        pkt.inject_cycle = now;
        ++counters_[static_cast<std::size_t>(p)].packets_injected;
      }
      q.push_back(f);
      ++counters_[static_cast<std::size_t>(p)].flits_injected;
      ++flits_in_network_;
      ++progress_;
      if (++ni.next_flit == len) {
        ni.outbound.pop_front();
        ni.next_flit = 0;
        --outbound_packets_;
      }
    }
  }

  // Decide every transfer against start-of-cycle state, then commit.
  moves_.clear();
  for (int r = 0; r < n; ++r) {
    for (int p = 0; p < planes_count_; ++p) {
      auto& pr = routers_[idx(r, p)];
      for (int o = 0; o < kNumPorts; ++o) {
        const auto os = static_cast<std::size_t>(o);
        int input = pr.owner[os];
        if (input < 0) {
          for (int k = 1; k <= kNumPorts; ++k) {
            const int i = (pr.rr[os] + k) % kNumPorts;
            const auto& q = pr.in[static_cast<std::size_t>(i)];
            if (q.empty()) continue;
            const Flit& f = q.front();
            if (!is_head(f.kind) || static_cast<int>(f.precomputed_port) != o) continue;
            input = i;
            break;
          }
          if (input < 0) continue;
          pr.owner[os] = input;
          pr.rr[os] = input;
        }
        const auto& q = pr.in[static_cast<std::size_t>(input)];
        if (q.empty()) continue;
        if (!downstream_ready(r, p, o, q.front())) continue;
        moves_.push_back({r, p, input, o});
      }
    }
  }

  for (const auto& m : moves_) {
    auto& pr = routers_[idx(m.router, m.plane)];
    const auto os = static_cast<std::size_t>(m.output);
    Flit f = pr.in[static_cast<std::size_t>(m.input)].front();
    pr.in[static_cast<std::size_t>(m.input)].pop_front();
    ++pr.out_flits[os];
    ++progress_;
    const Position here = position(m.router);
    const Port out = static_cast<Port>(m.output);
    auto& pkt = in_flight_.at(f.packet);
    if (observer_) observer_({now, here, m.plane + 1, out, f.kind, pkt.src, pkt.dst, pkt.id});
    if (is_tail(f.kind)) pr.owner[os] = -1;

    if (out == Port::Local) {
      auto& ni = nis_[idx(m.router, m.plane)];
      --flits_in_network_;
      ++counters_[static_cast<std::size_t>(m.plane)].flits_ejected;
      if (is_head(f.kind)) ni.reassembling = f.packet;
      if (is_tail(f.kind)) {
        pkt.eject_cycle = now;
        ni.completed.push_back(std::move(pkt));
        in_flight_.erase(f.packet);
        ni.reassembling = 0;
        ++ejected_waiting_;
        ++counters_[static_cast<std::size_t>(m.plane)].packets_ejected;
      }
      continue;
    }
    ++counters_[static_cast<std::size_t>(m.plane)].link_traversals;
    const Position next = neighbor(here, out);
    if (is_head(f.kind)) f.precomputed_port = route_lookahead(here, out, f.dst);
    routers_[idx(router_id(next), m.plane)].in[static_cast<std::size_t>(opposite(out))].push_back(f);
  }
}

std::vector<Packet> Noc::drain_ejected(Position tile) {
  std::vector<Packet> out;
  const int r = router_id(tile);
  for (int p = 0; p < planes_count_; ++p) {
    auto& ni = nis_[idx(r, p)];
    while (!ni.completed.empty()) {
      out.push_back(std::move(ni.completed.front()));
      ni.completed.pop_front();
      --ejected_waiting_;
    }
  }
  return out;
}

const Packet* Noc::peek_ejected(Position tile, PlaneId plane) const {
  const auto& ni = nis_[idx(router_id(tile), plane - 1)];
  return ni.completed.empty() ? nullptr : &ni.completed.front();
}

Packet Noc::pop_ejected(Position tile, PlaneId plane) {
  auto& ni = nis_[idx(router_id(tile), plane - 1)];
  if (ni.completed.empty()) throw SimError("pop_ejected on an empty interface");
  Packet p = std::move(ni.completed.front());
  ni.completed.pop_front();
  --ejected_waiting_;
  return p;
}

std::uint64_t Noc::link_flits(Position router, PlaneId plane, Port port) const {
  return routers_[idx(router_id(router), plane - 1)].out_flits[static_cast<std::size_t>(port)];
}

std::size_t Noc::queue_occupancy(Position router, PlaneId plane, Port input) const {
  return routers_[idx(router_id(router), plane - 1)].in[static_cast<std::size_t>(input)].size();
}

}  // namespace espsim
