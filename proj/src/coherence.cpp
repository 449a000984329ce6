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

#include "espsim/coherence.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

namespace espsim {

namespace {

std::uint64_t bit(TileId t) { return 1ULL << t; }

void encode_message(std::vector<std::uint64_t>& out, const Message& m) {
  out.push_back(static_cast<std::uint64_t>(m.type));
  out.push_back(m.src);
  out.push_back(m.dst);
  out.push_back(m.requester);
  out.push_back(m.addr);
  out.push_back(m.len);
  out.push_back(static_cast<std::uint64_t>(m.grant) | (m.dirty ? 0x100 : 0));
  out.push_back(m.arg);
  out.push_back(m.tag);
  out.push_back(m.data.size());
  out.insert(out.end(), m.data.begin(), m.data.end());
}

void encode_outbox(std::vector<std::uint64_t>& out, const Outbox& box) {
  for (int c = 0; c < kNumMessageClasses; ++c) {
    const auto& q = box.queue(static_cast<MessageClass>(c));
    out.push_back(q.size());
    for (const auto& m : q) encode_message(out, m);
  }
}

bool is_request(MsgType t) {
  switch (t) {
    case MsgType::GetS:
    case MsgType::GetM:
    case MsgType::PutM:
    case MsgType::DmaRead:
    case MsgType::DmaWrite:
    case MsgType::LlcFlush: return true;
    default: return false;
  }
}

}  // namespace

TileId HomeMap::home(Addr a) const {
  for (const auto& p : partitions)
    if (p.contains(a)) return p.tile;
  std::ostringstream os;
  os << "UnmappedAddress: 0x" << std::hex << a;
  throw SimError(os.str());
}

std::string_view to_string(L2State s) {
  switch (s) {
    case L2State::I: return "I";
    case L2State::S: return "S";
    case L2State::E: return "E";
    case L2State::M: return "M";
    case L2State::IS_D: return "IS_D";
    case L2State::IM_D: return "IM_D";
    case L2State::SM_D: return "SM_D";
    case L2State::MI_A: return "MI_A";
    case L2State::II_A: return "II_A";
  }
  return "?";
}

std::string_view to_string(LlcState s) {
  switch (s) {
    case LlcState::I: return "I";
    case LlcState::V: return "V";
    case LlcState::S: return "S";
    case LlcState::EM: return "EM";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// L2
// ---------------------------------------------------------------------------

L2Controller::L2Controller(TileId self, const CacheParams& params, HomeMap home)
    : self_(self),
      line_bytes_(params.line_size_bytes),
      words_per_line_(params.words_per_line()),
      sets_(params.l2_size_bytes / (params.line_size_bytes * params.l2_ways)),
      ways_(params.l2_ways),
      max_mshrs_(params.l2_mshrs),
      home_(std::make_shared<const HomeMap>(std::move(home))),
      ways_v_(static_cast<std::size_t>(sets_ * ways_)),
      words_(ways_v_.size() * static_cast<std::size_t>(words_per_line_), 0) {
  if (sets_ <= 0 || max_mshrs_ < 2) throw SimError("L2 needs at least one set and two MSHRs");
}

L2Controller::Way* L2Controller::find(Addr line) {
  const std::size_t base = set_of(line) * static_cast<std::size_t>(ways_);
  for (int i = 0; i < ways_; ++i) {
    auto& w = ways_v_[base + static_cast<std::size_t>(i)];
    if (w.state != L2State::I && w.line == line) return &w;
  }
  return nullptr;
}

const L2Controller::Way* L2Controller::find(Addr line) const {
  return const_cast<L2Controller*>(this)->find(line);
}

L2Controller::Way* L2Controller::victim_for(Addr line) {
  const std::size_t base = set_of(line) * static_cast<std::size_t>(ways_);
  Way* best = nullptr;
  for (int i = 0; i < ways_; ++i) {
    auto& w = ways_v_[base + static_cast<std::size_t>(i)];
    if (w.state == L2State::I) return &w;
    const bool stable = w.state == L2State::S || w.state == L2State::E || w.state == L2State::M;
    if (stable && (!best || w.lru < best->lru)) best = &w;
  }
  return best;
}

L2State L2Controller::state_of(Addr addr) const {
  const Addr line = line_of(addr);
  if (auto it = wb_.find(line); it != wb_.end()) return it->second.state;
  const Way* w = find(line);
  return w ? w->state : L2State::I;
}

std::optional<std::vector<Word>> L2Controller::data_of(Addr addr) const {
  const Way* w = find(line_of(addr));
  if (!w || (w->state != L2State::S && w->state != L2State::E && w->state != L2State::M)) return std::nullopt;
  return copy_data(*w);
}

std::vector<std::pair<Addr, L2State>> L2Controller::valid_lines() const {
  std::vector<std::pair<Addr, L2State>> out;
  for (const auto& w : ways_v_)
    if (w.state == L2State::S || w.state == L2State::E || w.state == L2State::M) out.emplace_back(w.line, w.state);
  return out;
}

void L2Controller::send(MsgType t, Addr line, Cycle, bool dirty, std::vector<Word> data) {
  Message m;
  m.type = t;
  m.src = self_;
  m.dst = home_->home(line);
  m.requester = self_;
  m.addr = line;
  m.dirty = dirty;
  m.data = std::move(data);
  out_.push(std::move(m));
}

void L2Controller::trace(Cycle now, Addr line, L2State from, const std::string& event, L2State to,
                         std::size_t before) {
  if (!hook_) return;
  hook_({now, self_, "L2", line, to_string(from), event, to_string(to), static_cast<int>(out_.size() - before)});
}

void L2Controller::protocol_error(const Message& m, L2State s) const {
  throw SimError("protocol error at L2 " + std::to_string(self_) + ": " + std::string(to_string(m.type)) +
                 " in state " + std::string(to_string(s)) + " (" + describe(m) + ")");
}

void L2Controller::complete_access(Way& w, const L2Request& req) {
  const auto off = static_cast<std::size_t>((req.addr - w.line) / kWordBytes);
  L2Completion c{req.id, req.op, req.addr, {}};
  if (req.op == L2Op::Read) {
    auto d = data(w);
    c.data.assign(d.begin() + static_cast<std::ptrdiff_t>(off), d.begin() + static_cast<std::ptrdiff_t>(off + req.words));
  } else {
    std::copy(req.data.begin(), req.data.end(), data(w).begin() + static_cast<std::ptrdiff_t>(off));
    w.state = L2State::M;
  }
  w.lru = ++lru_clock_;
  done_.push_back(std::move(c));
}

void L2Controller::evict(Way& w, std::optional<std::uint64_t> flush_id, Cycle now) {
  const std::size_t before = out_.size();
  const L2State from = w.state;
  Writeback wb;
  wb.owner = w.state == L2State::E || w.state == L2State::M;
  wb.dirty = w.state == L2State::M;
  if (wb.dirty) wb.data = copy_data(w);
  if (flush_id) wb.flush_ids.push_back(*flush_id);
  send(MsgType::PutM, w.line, now, wb.dirty, wb.data);
  ++stats_.puts;
  if (wb.dirty) ++stats_.writebacks;
  wb_.emplace(w.line, std::move(wb));
  w.state = L2State::I;
  trace(now, w.line, from, "Evict", L2State::MI_A, before);
}

bool L2Controller::issue(const L2Request& req, Cycle now) {
  if (req.op == L2Op::FlushAll) {
    if (flush_all_) return false;
    flush_all_ = req.id;
    progress_flush_all(now);
    return true;
  }
  const Addr line = line_of(req.addr);
  if (req.op != L2Op::Flush) {
    const Addr last = req.addr + (req.words == 0 ? 0 : (req.words - 1) * kWordBytes);
    if (req.words == 0 || line_of(last) != line) throw SimError("L2 access crosses a line boundary");
    if (req.op == L2Op::Write && req.data.size() != req.words) throw SimError("L2 write size mismatch");
  }
  if (wb_.count(line) || mshrs_.count(line)) {
    ++stats_.stalls;
    return false;
  }
  const auto mshr_full = [&](std::size_t need) { return outstanding() + need > static_cast<std::size_t>(max_mshrs_); };
  Way* w = find(line);
  if (req.op == L2Op::Flush) {
    if (!w) {
      done_.push_back({req.id, req.op, req.addr, {}});
      return true;
    }
    if (mshr_full(1)) {
      ++stats_.stalls;
      return false;
    }
    evict(*w, req.id, now);
    return true;
  }
  if (w) {
    if (req.op == L2Op::Read || w->state == L2State::M || w->state == L2State::E) {
      if (req.op == L2Op::Write && w->state == L2State::E) trace(now, line, L2State::E, "Store", L2State::M, out_.size());
      ++stats_.hits;
      complete_access(*w, req);
      return true;
    }
    if (mshr_full(1)) {
      ++stats_.stalls;
      return false;
    }
    const std::size_t before = out_.size();
    ++stats_.upgrades;
    w->state = L2State::SM_D;
    mshrs_.emplace(line, req);
    send(MsgType::GetM, line, now);
    trace(now, line, L2State::S, "Store", L2State::SM_D, before);
    return true;
  }
  Way* v = victim_for(line);
  if (!v) {
    ++stats_.stalls;
    return false;
  }
  const bool needs_wb = v->state != L2State::I;
  if (mshr_full(needs_wb ? 2 : 1)) {
    ++stats_.stalls;
    return false;
  }
  if (needs_wb) evict(*v, std::nullopt, now);
  const std::size_t before = out_.size();
  ++stats_.misses;
  v->line = line;
  v->state = req.op == L2Op::Read ? L2State::IS_D : L2State::IM_D;
  mshrs_.emplace(line, req);
  send(req.op == L2Op::Read ? MsgType::GetS : MsgType::GetM, line, now);
  trace(now, line, L2State::I, req.op == L2Op::Read ? "Load" : "Store", v->state, before);
  return true;
}

bool L2Controller::can_accept(const Message& m) const {
  switch (m.type) {
    case MsgType::Data:
    case MsgType::PutAck: return true;
    case MsgType::FwdGetS:
    case MsgType::FwdGetM:
    case MsgType::Recall:
    case MsgType::Inv: {
      if (!out_.empty(MessageClass::CohRsp)) return false;
      const Way* w = find(line_of(m.addr));
      if (!w) return true;
      // Data for our own request is still in flight: hold the forward
      // (head-of-line) until it lands.
      if (w->state == L2State::IS_D || w->state == L2State::IM_D) return false;
      if (w->state == L2State::SM_D) return m.type == MsgType::Inv;
      return true;
    }
    default: return true;
  }
}

void L2Controller::receive(const Message& m, Cycle now) {
  const Addr line = line_of(m.addr);
  const std::size_t before = out_.size();
  Way* w = find(line);
  auto wbit = wb_.find(line);
  switch (m.type) {
    case MsgType::Data: {
      if (!w || !mshrs_.count(line)) protocol_error(m, w ? w->state : L2State::I);
      const L2State from = w->state;
      if (from == L2State::IS_D) {
        w->state = m.grant == Grant::Exclusive ? L2State::E : (m.grant == Grant::Modified ? L2State::M : L2State::S);
      } else if (from == L2State::IM_D || from == L2State::SM_D) {
        w->state = L2State::M;
      } else {
        protocol_error(m, from);
      }
      set_data(*w, m.data);
      L2Request req = mshrs_.at(line);
      mshrs_.erase(line);
      complete_access(*w, req);
      trace(now, line, from, "Data", w->state, before);
      break;
    }
    case MsgType::PutAck: {
      if (wbit == wb_.end()) protocol_error(m, w ? w->state : L2State::I);
      const L2State from = wbit->second.state;
      for (auto id : wbit->second.flush_ids) done_.push_back({id, L2Op::Flush, line, {}});
      wb_.erase(wbit);
      trace(now, line, from, "PutAck", L2State::I, before);
      break;
    }
    case MsgType::FwdGetS:
    case MsgType::FwdGetM:
    case MsgType::Recall: {
      ++stats_.forwards;
      const bool downgrade = m.type == MsgType::FwdGetS;
      if (w && (w->state == L2State::M || w->state == L2State::E)) {
        const L2State from = w->state;
        const bool dirty = from == L2State::M;
        send(MsgType::Data, line, now, dirty, dirty ? copy_data(*w) : std::vector<Word>{});
        w->state = downgrade ? L2State::S : L2State::I;
        trace(now, line, from, std::string(to_string(m.type)), w->state, before);
      } else if (wbit != wb_.end() && wbit->second.state == L2State::MI_A && wbit->second.owner) {
        send(MsgType::Data, line, now, wbit->second.dirty, wbit->second.data);
        wbit->second.state = L2State::II_A;
        trace(now, line, L2State::MI_A, std::string(to_string(m.type)), L2State::II_A, before);
      } else {
        protocol_error(m, w ? w->state : (wbit != wb_.end() ? wbit->second.state : L2State::I));
      }
      break;
    }
    case MsgType::Inv: {
      ++stats_.invalidations;
      L2State from = L2State::I;
      L2State to = L2State::I;
      if (w && w->state == L2State::S) {
        from = L2State::S;
        w->state = L2State::I;
      } else if (w && w->state == L2State::SM_D) {
        from = L2State::SM_D;
        w->state = to = L2State::IM_D;
      } else if (wbit != wb_.end() && !(wbit->second.state == L2State::MI_A && wbit->second.owner)) {
        from = wbit->second.state;
        wbit->second.state = to = L2State::II_A;
      } else if (w || wbit != wb_.end()) {
        protocol_error(m, w ? w->state : wbit->second.state);
      }
      send(MsgType::InvAck, line, now);
      trace(now, line, from, "Inv", to, before);
      break;
    }
    default: protocol_error(m, w ? w->state : L2State::I);
  }
  progress_flush_all(now);
}

void L2Controller::step(Cycle now) { progress_flush_all(now); }

void L2Controller::progress_flush_all(Cycle now) {
  if (!flush_all_) return;
  bool remaining = false;
  for (auto& w : ways_v_) {
    if (w.state != L2State::S && w.state != L2State::E && w.state != L2State::M) continue;
    if (outstanding() >= static_cast<std::size_t>(max_mshrs_)) {
      remaining = true;
      break;
    }
    evict(w, std::nullopt, now);
  }
  if (!remaining && wb_.empty() && mshrs_.empty()) {
    done_.push_back({*flush_all_, L2Op::FlushAll, 0, {}});
    flush_all_.reset();
  }
}

void L2Controller::encode(std::vector<std::uint64_t>& out) const {
  for (int s = 0; s < sets_; ++s) {
    const std::size_t base = static_cast<std::size_t>(s * ways_);
    for (int i = 0; i < ways_; ++i) {
      const auto& w = ways_v_[base + static_cast<std::size_t>(i)];
      out.push_back(static_cast<std::uint64_t>(w.state));
      if (w.state == L2State::I) continue;
      out.push_back(w.line);
      std::uint64_t rank = 0;
      for (int j = 0; j < ways_; ++j) rank += ways_v_[base + static_cast<std::size_t>(j)].lru < w.lru;
      out.push_back(rank);
      auto d = data(w);
      out.insert(out.end(), d.begin(), d.end());
    }
  }
  out.push_back(mshrs_.size());
  for (const auto& [line, r] : mshrs_) {
    out.push_back(line);
    out.push_back(r.id);
    out.push_back(static_cast<std::uint64_t>(r.op));
    out.push_back(r.addr);
    out.push_back(r.words);
    out.insert(out.end(), r.data.begin(), r.data.end());
  }
  out.push_back(wb_.size());
  for (const auto& [line, wb] : wb_) {
    out.push_back(line);
    out.push_back(static_cast<std::uint64_t>(wb.state) | (wb.owner ? 0x100 : 0) | (wb.dirty ? 0x200 : 0));
    out.insert(out.end(), wb.data.begin(), wb.data.end());
    out.insert(out.end(), wb.flush_ids.begin(), wb.flush_ids.end());
  }
  out.push_back(flush_all_ ? *flush_all_ + 1 : 0);
  encode_outbox(out, out_);
  out.push_back(done_.size());
  for (const auto& c : done_) {
    out.push_back(c.id);
    out.insert(out.end(), c.data.begin(), c.data.end());
  }
}

// ---------------------------------------------------------------------------
// LLC
// ---------------------------------------------------------------------------

LlcController::LlcController(TileId self, const CacheParams& params)
    : self_(self),
      line_bytes_(params.line_size_bytes),
      words_per_line_(params.words_per_line()),
      sets_(params.llc_size_bytes / (params.line_size_bytes * params.llc_ways)),
      ways_(params.llc_ways),
      ways_v_(static_cast<std::size_t>(sets_ * ways_)),
      words_(ways_v_.size() * static_cast<std::size_t>(words_per_line_), 0) {
  if (sets_ <= 0) throw SimError("LLC needs at least one set");
}

std::optional<std::size_t> LlcController::find(Addr line) const {
  const std::size_t base = set_of(line) * static_cast<std::size_t>(ways_);
  for (int i = 0; i < ways_; ++i) {
    const auto& w = ways_v_[base + static_cast<std::size_t>(i)];
    if (w.state != LlcState::I && w.line == line) return base + static_cast<std::size_t>(i);
  }
  return std::nullopt;
}

std::size_t LlcController::pick_victim(Addr line) const {
  const std::size_t base = set_of(line) * static_cast<std::size_t>(ways_);
  std::size_t best = base;
  for (int i = 0; i < ways_; ++i) {
    const std::size_t k = base + static_cast<std::size_t>(i);
    if (ways_v_[k].state == LlcState::I) return k;
    if (ways_v_[k].lru < ways_v_[best].lru) best = k;
  }
  return best;
}

LlcLineView LlcController::line(Addr addr) const {
  auto slot = find(line_of(addr));
  if (!slot) return {};
  const auto& w = ways_v_[*slot];
  return {w.state, w.sharers, w.owner, w.dirty, copy_data(w)};
}

bool LlcController::can_accept(const Message& m) const {
  if (!is_request(m.type)) return true;
  return !txn_ && out_.empty();
}

void LlcController::protocol_error(const Message& m) const {
  throw SimError("protocol error at LLC " + std::to_string(self_) + ": unexpected " + describe(m));
}

void LlcController::send(MsgType t, TileId dst, Addr addr, Cycle) {
  Message m;
  m.type = t;
  m.src = self_;
  m.dst = dst;
  m.requester = txn_ ? txn_->req.src : dst;
  m.addr = addr;
  out_.push(std::move(m));
}

void LlcController::send_data(TileId dst, Addr addr, Grant g, const std::vector<Word>& data, Cycle now) {
  send(MsgType::Data, dst, addr, now);
  auto& q = out_.queue(MessageClass::CohRsp);
  q.back().grant = g;
  q.back().data = data;
}

void LlcController::trace(Cycle now, Addr line, LlcState from, const std::string& event, LlcState to,
                          std::size_t before) {
  if (!hook_) return;
  hook_({now, self_, "LLC", line, to_string(from), event, to_string(to), static_cast<int>(out_.size() - before)});
}

void LlcController::receive(const Message& m, Cycle now) {
  if (is_request(m.type)) {
    if (txn_) protocol_error(m);
    start(m, now);
    return;
  }
  if (!txn_ || txn_->waiting <= 0 || (txn_->phase != Phase::EvictWait && txn_->phase != Phase::CohWait)) {
    protocol_error(m);
  }
  auto& w = ways_v_[txn_->slot];
  if (m.type == MsgType::Data) {
    if (m.dirty) {
      set_data(w, m.data);
      w.dirty = true;
    }
  } else if (m.type != MsgType::InvAck) {
    protocol_error(m);
  }
  --txn_->waiting;
  advance(now);
}

void LlcController::dram_response(const DramResponse& r, Cycle now) {
  if (!txn_) throw SimError("LLC received an unexpected DRAM response");
  if (r.write) {
    --txn_->dram_acks;
  } else {
    if (txn_->phase != Phase::FillWait) throw SimError("LLC received an unexpected DRAM fill");
    auto& w = ways_v_[txn_->slot];
    set_data(w, r.data);
    w.state = LlcState::V;
    w.dirty = false;
    txn_->phase = Phase::Apply;
  }
  advance(now);
}

void LlcController::start(const Message& m, Cycle now) {
  ++stats_.requests;
  if (m.type == MsgType::PutM) {
    const Addr line = line_of(m.addr);
    const std::size_t before = out_.size();
    auto slot = find(line);
    LlcState from = LlcState::I;
    LlcState to = LlcState::I;
    if (slot) {
      auto& w = ways_v_[*slot];
      from = to = w.state;
      if (w.state == LlcState::EM && w.owner == m.src) {
        if (m.dirty) {
          set_data(w, m.data);
          w.dirty = true;
        }
        w.state = to = LlcState::V;
        w.owner = kNoTile;
      } else if (w.state == LlcState::S && (w.sharers & bit(m.src))) {
        w.sharers &= ~bit(m.src);
        if (w.sharers == 0) w.state = to = LlcState::V;
      }
    }
    Message ack;
    ack.type = MsgType::PutAck;
    ack.src = self_;
    ack.dst = m.src;
    ack.requester = m.src;
    ack.addr = line;
    out_.push(std::move(ack));
    trace(now, line, from, "PutM", to, before);
    return;
  }
  Txn t;
  t.req = m;
  if (m.type == MsgType::GetS || m.type == MsgType::GetM) {
    t.lines.push_back(line_of(m.addr));
  } else if (m.type == MsgType::LlcFlush) {
    const Addr end = m.addr + m.arg;
    for (const auto& w : ways_v_)
      if (w.state != LlcState::I && w.line + static_cast<Addr>(line_bytes_) > m.addr && w.line < end)
        t.lines.push_back(w.line);
    std::sort(t.lines.begin(), t.lines.end());
  } else {
    ++stats_.dma_requests;
    const std::uint32_t len = m.type == MsgType::DmaWrite ? static_cast<std::uint32_t>(m.data.size()) : m.len;
    t.req.len = len;
    if (len == 0) throw SimError("DMA request with zero length");
    const Addr end = m.addr + static_cast<Addr>(len) * kWordBytes;
    for (Addr l = line_of(m.addr); l < end; l += static_cast<Addr>(line_bytes_)) t.lines.push_back(l);
  }
  txn_ = std::move(t);
  advance(now);
}

bool LlcController::dma_full_line(Addr line) const {
  const Message& r = txn_->req;
  return r.type == MsgType::DmaWrite && r.addr <= line &&
         r.addr + static_cast<Addr>(r.len) * kWordBytes >= line + static_cast<Addr>(line_bytes_);
}

void LlcController::recall_privates(Way& w, Cycle now, bool downgrade_only) {
  if (w.state == LlcState::EM) {
    send(downgrade_only ? MsgType::FwdGetS : MsgType::Recall, w.owner, w.line, now);
    ++stats_.forwards_sent;
    txn_->waiting = 1;
  } else if (w.state == LlcState::S) {
    txn_->waiting = 0;
    for (TileId t = 0; t < 64; ++t) {
      if (!(w.sharers & bit(t))) continue;
      send(MsgType::Inv, t, w.line, now);
      ++stats_.invalidations_sent;
      ++txn_->waiting;
    }
  }
}

void LlcController::advance(Cycle now) {
  while (txn_) {
    Txn& t = *txn_;
    switch (t.phase) {
      case Phase::LineStart: {
        if (t.cur == t.lines.size()) {
          if (t.dram_acks > 0) {
            t.phase = Phase::FlushDrain;
            break;
          }
          finish_txn(now);
          break;
        }
        const Addr line = t.lines[t.cur];
        if (auto slot = find(line)) {
          ++stats_.hits;
          t.slot = *slot;
          t.phase = Phase::Apply;
          break;
        }
        if (t.req.type == MsgType::LlcFlush) {
          ++t.cur;
          break;
        }
        ++stats_.misses;
        t.slot = pick_victim(line);
        auto& v = ways_v_[t.slot];
        if (v.state != LlcState::I) {
          ++stats_.evictions;
          const std::size_t before = out_.size();
          recall_privates(v, now, false);
          trace(now, v.line, v.state, "Evict", v.state, before);
        }
        t.phase = Phase::EvictWait;
        break;
      }
      case Phase::EvictWait: {
        if (t.waiting > 0) return;
        auto& v = ways_v_[t.slot];
        if (v.state != LlcState::I && v.dirty) {
          dram_out_.push_back({DramSource::Llc, true, false, v.line, 0, copy_data(v), 0});
          ++stats_.dram_writes;
        }
        v.state = LlcState::I;
        v.sharers = 0;
        v.owner = kNoTile;
        v.dirty = false;
        v.line = t.lines[t.cur];
        if (dma_full_line(v.line)) {
          set_data(v, {});
          v.state = LlcState::V;
          t.phase = Phase::Apply;
        } else {
          dram_out_.push_back({DramSource::Llc, false, true, v.line, static_cast<std::uint32_t>(words_per_line_), {}, 0});
          ++stats_.dram_reads;
          t.phase = Phase::FillWait;
        }
        break;
      }
      case Phase::FillWait: return;
      case Phase::Apply: {
        auto& w = ways_v_[t.slot];
        w.lru = ++lru_clock_;
        if (!apply(w, now)) t.phase = Phase::CohWait;
        break;
      }
      case Phase::CohWait: {
        if (t.waiting > 0) return;
        finish_coh(ways_v_[t.slot], now);
        break;
      }
      case Phase::FlushDrain: {
        if (t.dram_acks > 0) return;
        finish_txn(now);
        break;
      }
    }
  }
}

// Serves the current line if no private cache must act first; otherwise
// sends the forwards/invalidations and returns false.
bool LlcController::apply(Way& w, Cycle now) {
  Txn& t = *txn_;
  const Message& r = t.req;
  const TileId req = r.src;
  const std::size_t before = out_.size();
  const LlcState from = w.state;
  switch (r.type) {
    case MsgType::GetS:
      if (w.state == LlcState::EM) {
        if (w.owner == req) protocol_error(r);
        send(MsgType::FwdGetS, w.owner, w.line, now);
        ++stats_.forwards_sent;
        t.waiting = 1;
        trace(now, w.line, from, "GetS", from, before);
        return false;
      }
      if (w.state == LlcState::V) {
        w.state = LlcState::EM;
        w.owner = req;
        send_data(req, w.line, Grant::Exclusive, copy_data(w), now);
      } else {
        w.sharers |= bit(req);
        send_data(req, w.line, Grant::Shared, copy_data(w), now);
      }
      trace(now, w.line, from, "GetS", w.state, before);
      finish_line(now);
      return true;
    case MsgType::GetM:
      if (w.state == LlcState::EM) {
        if (w.owner == req) protocol_error(r);
        send(MsgType::FwdGetM, w.owner, w.line, now);
        ++stats_.forwards_sent;
        t.waiting = 1;
        trace(now, w.line, from, "GetM", from, before);
        return false;
      }
      if (w.state == LlcState::S && (w.sharers & ~bit(req)) != 0) {
        w.sharers &= ~bit(req);
        recall_privates(w, now, false);
        trace(now, w.line, from, "GetM", from, before);
        return false;
      }
      finish_coh(w, now);
      return true;
    case MsgType::DmaRead:
      if (static_cast<CoherenceMode>(r.arg) == CoherenceMode::CoherentDMA && w.state == LlcState::EM) {
        recall_privates(w, now, true);
        trace(now, w.line, from, "DmaRead", from, before);
        return false;
      }
      finish_coh(w, now);
      return true;
    case MsgType::DmaWrite:
      if (static_cast<CoherenceMode>(r.arg) == CoherenceMode::CoherentDMA &&
          (w.state == LlcState::EM || w.state == LlcState::S)) {
        recall_privates(w, now, false);
        trace(now, w.line, from, "DmaWrite", from, before);
        return false;
      }
      finish_coh(w, now);
      return true;
    case MsgType::LlcFlush:
      if (w.state == LlcState::EM || w.state == LlcState::S) {
        recall_privates(w, now, false);
        trace(now, w.line, from, "LlcFlush", from, before);
        return false;
      }
      finish_coh(w, now);
      return true;
    default: protocol_error(r);
  }
}

// Completes the current line once every private cache has answered.
void LlcController::finish_coh(Way& w, Cycle now) {
  Txn& t = *txn_;
  const Message& r = t.req;
  const TileId req = r.src;
  const std::size_t before = out_.size();
  const LlcState from = w.state;
  switch (r.type) {
    case MsgType::GetS:
      // Previous owner downgraded to S (or is finishing its own writeback).
      w.sharers = bit(w.owner) | bit(req);
      w.owner = kNoTile;
      w.state = LlcState::S;
      send_data(req, w.line, Grant::Shared, copy_data(w), now);
      break;
    case MsgType::GetM:
      w.state = LlcState::EM;
      w.owner = req;
      w.sharers = 0;
      send_data(req, w.line, Grant::Modified, copy_data(w), now);
      break;
    case MsgType::DmaRead: {
      if (w.state == LlcState::EM && static_cast<CoherenceMode>(r.arg) == CoherenceMode::CoherentDMA) {
        w.sharers = bit(w.owner);
        w.owner = kNoTile;
        w.state = LlcState::S;
      }
      const Addr lo = std::max(r.addr, w.line);
      const Addr hi = std::min(r.addr + static_cast<Addr>(r.len) * kWordBytes, w.line + static_cast<Addr>(line_bytes_));
      for (Addr a = lo; a < hi; a += kWordBytes) t.gathered.push_back(data(w)[(a - w.line) / kWordBytes]);
      stats_.dma_words += (hi - lo) / kWordBytes;
      break;
    }
    case MsgType::DmaWrite: {
      if (static_cast<CoherenceMode>(r.arg) == CoherenceMode::CoherentDMA) {
        w.state = LlcState::V;
        w.owner = kNoTile;
        w.sharers = 0;
      }
      const Addr lo = std::max(r.addr, w.line);
      const Addr hi = std::min(r.addr + static_cast<Addr>(r.len) * kWordBytes, w.line + static_cast<Addr>(line_bytes_));
      for (Addr a = lo; a < hi; a += kWordBytes) data(w)[(a - w.line) / kWordBytes] = r.data[(a - r.addr) / kWordBytes];
      w.dirty = true;
      stats_.dma_words += (hi - lo) / kWordBytes;
      break;
    }
    case MsgType::LlcFlush:
      if (w.dirty) {
        dram_out_.push_back({DramSource::Llc, true, true, w.line, 0, copy_data(w), 0});
        ++stats_.dram_writes;
        ++t.dram_acks;
      }
      w.state = LlcState::I;
      w.owner = kNoTile;
      w.sharers = 0;
      w.dirty = false;
      break;
    default: protocol_error(r);
  }
  trace(now, w.line, from, std::string(to_string(r.type)), w.state, before);
  finish_line(now);
}

void LlcController::finish_line(Cycle) {
  ++txn_->cur;
  txn_->phase = Phase::LineStart;
}

void LlcController::finish_txn(Cycle now) {
  Txn t = std::move(*txn_);
  txn_.reset();
  const Message& r = t.req;
  Message m;
  m.src = self_;
  m.dst = r.src;
  m.requester = r.src;
  m.addr = r.addr;
  m.tag = r.tag;
  switch (r.type) {
    case MsgType::DmaRead:
      m.type = MsgType::DmaData;
      m.len = r.len;
      m.data = std::move(t.gathered);
      break;
    case MsgType::DmaWrite:
      m.type = MsgType::DmaWriteAck;
      m.len = r.len;
      break;
    case MsgType::LlcFlush: m.type = MsgType::LlcFlushAck; break;
    default: return;  // coherence requests answered per line
  }
  (void)now;
  out_.push(std::move(m));
}

void LlcController::encode(std::vector<std::uint64_t>& out) const {
  for (int s = 0; s < sets_; ++s) {
    const std::size_t base = static_cast<std::size_t>(s * ways_);
    for (int i = 0; i < ways_; ++i) {
      const auto& w = ways_v_[base + static_cast<std::size_t>(i)];
      out.push_back(static_cast<std::uint64_t>(w.state));
      if (w.state == LlcState::I) continue;
      out.push_back(w.line);
      out.push_back(w.sharers);
      out.push_back(w.owner);
      out.push_back(w.dirty);
      std::uint64_t rank = 0;
      for (int j = 0; j < ways_; ++j) rank += ways_v_[base + static_cast<std::size_t>(j)].lru < w.lru;
      out.push_back(rank);
      auto d = data(w);
      out.insert(out.end(), d.begin(), d.end());
    }
  }
  if (txn_) {
    out.push_back(1);
    encode_message(out, txn_->req);
    out.push_back(txn_->cur);
    out.push_back(static_cast<std::uint64_t>(txn_->phase));
    out.push_back(static_cast<std::uint64_t>(txn_->waiting));
    out.push_back(txn_->slot);
    out.push_back(static_cast<std::uint64_t>(txn_->dram_acks));
    out.insert(out.end(), txn_->gathered.begin(), txn_->gathered.end());
  } else {
    out.push_back(0);
  }
  encode_outbox(out, out_);
  out.push_back(dram_out_.size());
  for (const auto& d : dram_out_) {
    out.push_back(d.write);
    out.push_back(d.addr);
    out.insert(out.end(), d.data.begin(), d.data.end());
  }
}

std::optional<std::string> check_swmr(const std::vector<const L2Controller*>& caches) {
  std::map<Addr, std::pair<int, int>> count;  // (writers, readers)
  for (const auto* c : caches) {
    for (const auto& [line, st] : c->valid_lines()) {
      auto& e = count[line];
      if (st == L2State::S) ++e.second;
      else ++e.first;
    }
  }
  for (const auto& [line, e] : count) {
    if (e.first > 1 || (e.first == 1 && e.second > 0)) {
      std::ostringstream os;
      os << "SWMR violated on line 0x" << std::hex << line << std::dec << ": " << e.first << " writer(s), "
         << e.second << " reader(s)";
      return os.str();
    }
  }
  return std::nullopt;
}

}  // namespace espsim
