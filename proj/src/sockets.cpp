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

#include "espsim/sockets.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace espsim {

namespace {

std::string entity_name(TileKind k, Position p) {
  std::string prefix;
  switch (k) {
    case TileKind::Processor: prefix = "cpu"; break;
    case TileKind::Accelerator: prefix = "acc"; break;
    case TileKind::Memory: prefix = "mem"; break;
    case TileKind::Auxiliary: prefix = "aux"; break;
    case TileKind::Empty: prefix = "empty"; break;
  }
  return prefix + "@" + std::to_string(p.row) + "." + std::to_string(p.col);
}

std::string hex(Addr a) {
  std::ostringstream os;
  os << "0x" << std::hex << a;
  return os.str();
}

bool is_memory_request(MsgType t) {
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

bool is_l2_inbound(MsgType t) {
  switch (t) {
    case MsgType::FwdGetS:
    case MsgType::FwdGetM:
    case MsgType::Inv:
    case MsgType::Recall:
    case MsgType::Data:
    case MsgType::PutAck: return true;
    default: return false;
  }
}

// FNV-1a: stable across platforms, unlike std::hash.
std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

}  // namespace

Resolved resolve_address(const MemoryMap& map, Addr a) {
  if (const auto* p = map.partition_for(a)) return {Resolved::Kind::Memory, p->tile, 0};
  if (auto owner = map.aperture_owner(a)) {
    return {Resolved::Kind::Register, *owner, a - map.register_apertures.at(*owner).base};
  }
  return {};
}

Packet master_proxy_translate(const ValidatedSoC& soc, const MemoryMap& map, const PlaneMap& planes, TileId src,
                              Message msg) {
  const Resolved r = resolve_address(map, msg.addr);
  const bool reg = msg.type == MsgType::RegWrite || msg.type == MsgType::RegRead;
  if (r.kind == Resolved::Kind::Unmapped || (reg && r.kind != Resolved::Kind::Register) ||
      (!reg && is_memory_request(msg.type) && r.kind != Resolved::Kind::Memory)) {
    throw SimError("UnmappedAddress " + hex(msg.addr) + " for " + std::string(to_string(msg.type)));
  }
  msg.src = src;
  msg.dst = r.tile;
  if (msg.requester == kNoTile) msg.requester = src;
  if (reg) msg.addr = r.offset;
  return make_packet(planes, soc.position_of(src), soc.position_of(r.tile), std::move(msg));
}

// ---------------------------------------------------------------------------
// TileSocket
// ---------------------------------------------------------------------------

TileSocket::TileSocket(SocContext& ctx, TileId id)
    : ctx_(ctx), id_(id), pos_(ctx.soc->position_of(id)), entity_(entity_name(ctx.soc->tile(id).kind, pos_)) {}

void TileSocket::send(Message m) {
  m.src = id_;
  if (m.requester == kNoTile) m.requester = id_;
  if (m.dst == id_) {
    ++shortcuts_;
    local_.push_back(std::move(m));
    return;
  }
  pending_[static_cast<std::size_t>(class_of(m.type))].push_back(std::move(m));
}

void TileSocket::drain(Outbox& box) {
  for (int c = 0; c < kNumMessageClasses; ++c) {
    auto& q = box.queue(static_cast<MessageClass>(c));
    for (auto& m : q) send(std::move(m));
    q.clear();
  }
}

bool TileSocket::pending_empty() const {
  return std::all_of(pending_.begin(), pending_.end(), [](const auto& q) { return q.empty(); });
}

void TileSocket::receive(Cycle now) {
  while (!local_.empty() && handle(local_.front(), now)) {
    local_.pop_front();
    bump();
  }
  Noc& noc = *ctx_.noc;
  for (PlaneId plane = 1; plane <= noc.planes(); ++plane) {
    while (const Packet* p = noc.peek_ejected(pos_, plane)) {
      if (!handle(p->msg, now)) break;
      noc.pop_ejected(pos_, plane);
      bump();
    }
  }
}

void TileSocket::commit(Cycle now) {
  Noc& noc = *ctx_.noc;
  for (int c = 0; c < kNumMessageClasses; ++c) {
    const PlaneId plane = noc.plane_map().plane(static_cast<MessageClass>(c));
    auto& q = pending_[static_cast<std::size_t>(c)];
    while (!q.empty() && noc.can_inject(pos_, plane)) {
      Packet pkt = make_packet(noc.plane_map(), pos_, ctx_.soc->position_of(q.front().dst), q.front());
      if (!noc.inject_packet(pos_, pkt, now)) break;
      on_injected(q.front(), now);
      q.pop_front();
      bump();
    }
  }
}

std::string TileSocket::dump() const {
  std::ostringstream os;
  os << entity_ << ": outbound";
  for (int c = 0; c < kNumMessageClasses; ++c) {
    const auto& q = pending_[static_cast<std::size_t>(c)];
    if (q.empty()) continue;
    os << ' ' << to_string(static_cast<MessageClass>(c)) << '=' << q.size() << " [head " << describe(q.front()) << ']';
  }
  if (!local_.empty()) os << " local=" << local_.size();
  return os.str();
}

// ---------------------------------------------------------------------------
// MemorySocket
// ---------------------------------------------------------------------------

MemorySocket::MemorySocket(SocContext& ctx, TileId id)
    : TileSocket(ctx, id),
      llc_(id, ctx.soc->config().cache),
      dram_(ctx.soc->config().dram.latency_cycles, ctx.soc->config().dram.words_per_cycle, ctx.store) {}

bool MemorySocket::handle(const Message& m, Cycle now) {
  switch (m.type) {
    case MsgType::DmaRead:
    case MsgType::DmaWrite: {
      const std::uint32_t words = m.type == MsgType::DmaWrite ? static_cast<std::uint32_t>(m.data.size()) : m.len;
      if (static_cast<CoherenceMode>(m.arg) == CoherenceMode::NonCoherentDMA) {
        DramRequest r;
        r.source = DramSource::Bypass;
        r.write = m.type == MsgType::DmaWrite;
        r.addr = m.addr;
        r.words = words;
        r.data = m.data;
        r.tag = next_tag_++;
        bypass_[r.tag] = {m.src, m.tag, words};
        dram_.enqueue(std::move(r), now);
      } else {
        if (!llc_.can_accept(m)) return false;
        llc_.receive(m, now);
      }
      auto& d = dma_words_[m.src];
      (m.type == MsgType::DmaWrite ? d.written : d.read) += words;
      return true;
    }
    case MsgType::GetS:
    case MsgType::GetM:
    case MsgType::PutM:
    case MsgType::Data:
    case MsgType::InvAck:
    case MsgType::LlcFlush:
      if (!llc_.can_accept(m)) return false;
      llc_.receive(m, now);
      return true;
    case MsgType::RegRead: {
      ctx_.log->warn(now, entity_, "NoRegisterFile", "offset=" + std::to_string(m.addr));
      Message r;
      r.type = MsgType::RegReadRsp;
      r.dst = m.src;
      r.addr = m.addr;
      send(std::move(r));
      return true;
    }
    case MsgType::RegWrite:
      ctx_.log->warn(now, entity_, "NoRegisterFile", "offset=" + std::to_string(m.addr));
      return true;
    default:
      throw SimError(entity_ + ": unexpected " + describe(m));
  }
}

void MemorySocket::step_caches(Cycle now) {
  llc_.step(now);
  drain(llc_.outbox());
  for (auto& r : llc_.dram_out()) dram_.enqueue(std::move(r), now);
  llc_.dram_out().clear();
}

void MemorySocket::step_dram(Cycle now) {
  for (auto& resp : dram_.step(now)) {
    bump();
    if (resp.source == DramSource::Llc) {
      llc_.dram_response(resp, now);
      continue;
    }
    auto it = bypass_.find(resp.tag);
    if (it == bypass_.end()) throw SimError(entity_ + ": DRAM response without a bypass request");
    Message m;
    m.type = resp.write ? MsgType::DmaWriteAck : MsgType::DmaData;
    m.dst = it->second.requester;
    m.requester = it->second.requester;
    m.addr = resp.addr;
    m.len = it->second.len;
    m.tag = it->second.tag;
    if (!resp.write) m.data = std::move(resp.data);
    bypass_.erase(it);
    send(std::move(m));
  }
  drain(llc_.outbox());
  for (auto& r : llc_.dram_out()) dram_.enqueue(std::move(r), now);
  llc_.dram_out().clear();
}

bool MemorySocket::idle() const { return TileSocket::idle() && llc_.idle() && dram_.idle() && bypass_.empty(); }

std::uint64_t MemorySocket::dma_words_total() const {
  std::uint64_t n = 0;
  for (const auto& [_, w] : dma_words_) n += w.read + w.written;
  return n;
}

std::string MemorySocket::dump() const {
  std::ostringstream os;
  os << TileSocket::dump() << "; llc " << (llc_.busy() ? "busy" : "free") << "; dram queue " << dram_.queue_depth();
  return os.str();
}

// ---------------------------------------------------------------------------
// AuxSocket
// ---------------------------------------------------------------------------

bool AuxSocket::handle(const Message& m, Cycle now) {
  if (m.type == MsgType::AccDone) {
    if (pending_.count(m.src) != 0) ctx_.log->warn(now, entity_, "IrqOverrun", "from=" + std::to_string(m.src));
    pending_[m.src] = {static_cast<TileId>(m.arg), m.tag};
    return true;
  }
  if (m.type == MsgType::RegRead) {
    Message r;
    r.type = MsgType::RegReadRsp;
    r.dst = m.src;
    r.addr = m.addr;
    send(std::move(r));
  }
  ctx_.log->warn(now, entity_, "NoRegisterFile", describe(m));
  return true;
}

void AuxSocket::step_caches(Cycle now) {
  // Pending bits are served in tile order, so simultaneous completions are
  // dispatched deterministically.
  for (const auto& [accel, v] : pending_) {
    const auto [owner, emitted] = v;
    const bool valid = owner < ctx_.soc->num_tiles() && ctx_.soc->tile(owner).kind == TileKind::Processor;
    if (!valid) {
      ++spurious_;
      ctx_.log->warn(now, entity_, "SpuriousIrq", "from=" + std::to_string(accel) + " owner=" + std::to_string(owner));
      continue;
    }
    Message m;
    m.type = MsgType::Irq;
    m.dst = owner;
    m.arg = accel;
    m.tag = emitted;
    send(std::move(m));
    ++forwarded_;
    bump();
  }
  pending_.clear();
}

// ---------------------------------------------------------------------------
// AcceleratorSocket
// ---------------------------------------------------------------------------

AcceleratorSocket::AcceleratorSocket(SocContext& ctx, TileId id, const AcceleratorParams& params)
    : TileSocket(ctx, id),
      acc_(id, entity_, params),
      l2_(id, ctx.soc->config().cache, ctx.home) {}

bool AcceleratorSocket::handle(const Message& m, Cycle now) {
  switch (m.type) {
    case MsgType::RegWrite: acc_.write_register(m.addr, m.arg, now); return true;
    case MsgType::RegRead: {
      auto v = acc_.read_register(m.addr);
      if (!v) ctx_.log->warn(now, entity_, "BadRegisterOffset", "offset=" + std::to_string(m.addr));
      Message r;
      r.type = MsgType::RegReadRsp;
      r.dst = m.src;
      r.addr = m.addr;
      r.arg = v.value_or(0);
      send(std::move(r));
      return true;
    }
    case MsgType::DmaData:
    case MsgType::P2PData: acc_.load_data(m.tag, m.data, now); return true;
    case MsgType::DmaWriteAck: acc_.store_ack(m.tag, now); return true;
    case MsgType::P2PReq: acc_.p2p_credit(m.src, m.len, now); return true;
    default:
      if (!is_l2_inbound(m.type)) throw SimError(entity_ + ": unexpected " + describe(m));
      if (!l2_.can_accept(m)) return false;
      l2_.receive(m, now);
      return true;
  }
}

void AcceleratorSocket::start_request(AccRequest r, Cycle now) {
  using K = AccRequest::Kind;
  if ((r.kind == K::Read || r.kind == K::Write) && r.mode == CoherenceMode::FullyCoherent) {
    // Through the private cache, one request per line touched.
    const Addr line_bytes = static_cast<Addr>(ctx_.soc->config().cache.line_size_bytes);
    FcBurst b{r.tag, r.kind == K::Write, 0, {}};
    b.data = r.kind == K::Write ? r.data : std::vector<Word>(r.words, 0);
    std::size_t off = 0;
    while (off < r.words) {
      const Addr a = r.addr + off * kWordBytes;
      const std::size_t room = static_cast<std::size_t>((line_bytes - (a % line_bytes)) / kWordBytes);
      const std::size_t n = std::min<std::size_t>(room, r.words - off);
      FcChunk c;
      c.req.id = next_l2_id_++;
      c.req.op = b.write ? L2Op::Write : L2Op::Read;
      c.req.addr = a;
      c.req.words = static_cast<std::uint32_t>(n);
      if (b.write) c.req.data.assign(r.data.begin() + static_cast<std::ptrdiff_t>(off),
                                     r.data.begin() + static_cast<std::ptrdiff_t>(off + n));
      c.burst = static_cast<std::size_t>(r.tag);
      c.offset = off;
      fc_queue_.push_back(std::move(c));
      ++b.remaining;
      off += n;
    }
    fc_bursts_[r.tag] = std::move(b);
    return;
  }
  Message m;
  m.tag = r.tag;
  m.len = r.words;
  switch (r.kind) {
    case K::Read:
    case K::Write: {
      m.type = r.kind == K::Read ? MsgType::DmaRead : MsgType::DmaWrite;
      m.addr = r.addr;
      m.arg = static_cast<std::uint64_t>(r.mode);
      m.dst = ctx_.home.home(r.addr);
      const Addr last = r.addr + (static_cast<Addr>(r.words) - 1) * kWordBytes;
      if (ctx_.home.home(last) != m.dst) throw SimError(entity_ + ": DMA burst crosses memory partitions");
      m.data = std::move(r.data);
      break;
    }
    case K::P2PCredit:
      m.type = MsgType::P2PReq;
      m.dst = r.peer;
      break;
    case K::P2PSend:
      m.type = MsgType::P2PData;
      m.dst = r.peer;
      m.data = std::move(r.data);
      break;
  }
  (void)now;
  send(std::move(m));
}

void AcceleratorSocket::send_acc_done(TileId owner, Cycle emitted) {
  Message m;
  m.type = MsgType::AccDone;
  m.dst = ctx_.soc->aux_tile();
  m.arg = owner;
  m.tag = emitted;
  send(std::move(m));
  bump();
}

void AcceleratorSocket::step_caches(Cycle now) {
  l2_.step(now);
  if (held_irq_ && !flush_id_) {
    L2Request r;
    r.id = next_l2_id_++;
    r.op = L2Op::FlushAll;
    if (l2_.issue(r, now)) flush_id_ = r.id;
  }
  while (!fc_queue_.empty() && l2_.issue(fc_queue_.front().req, now)) {
    fc_inflight_[fc_queue_.front().req.id] = std::move(fc_queue_.front());
    fc_queue_.pop_front();
  }
  for (const auto& c : l2_.completions()) {
    if (c.op == L2Op::FlushAll) {
      send_acc_done(held_irq_->first, held_irq_->second);
      held_irq_.reset();
      flush_id_.reset();
      continue;
    }
    auto it = fc_inflight_.find(c.id);
    if (it == fc_inflight_.end()) throw SimError(entity_ + ": stray L2 completion");
    const FcChunk chunk = std::move(it->second);
    fc_inflight_.erase(it);
    auto& b = fc_bursts_.at(chunk.burst);
    if (!b.write) std::copy(c.data.begin(), c.data.end(), b.data.begin() + static_cast<std::ptrdiff_t>(chunk.offset));
    if (--b.remaining == 0) {
      if (b.write) acc_.store_ack(b.tag, now);
      else acc_.load_data(b.tag, b.data, now);
      fc_bursts_.erase(chunk.burst);
    }
    bump();
  }
  l2_.completions().clear();
  drain(l2_.outbox());
}

void AcceleratorSocket::step_accelerator(Cycle now) {
  acc_.step(now);
  auto& reqs = acc_.requests();
  for (auto& r : reqs) start_request(std::move(r), now);
  if (!reqs.empty()) bump();
  reqs.clear();
  if (auto owner = acc_.take_irq()) {
    if (acc_.mode() == CoherenceMode::FullyCoherent) held_irq_ = {{*owner, now}};
    else send_acc_done(*owner, now);
  }
  sync_timeline();
}

void AcceleratorSocket::on_injected(const Message& m, Cycle now) {
  if (m.type == MsgType::P2PData) acc_.store_ack(m.tag, now);
}

void AcceleratorSocket::sync_timeline() {
  const auto& t = acc_.timeline();
  for (; timeline_synced_ < t.size(); ++timeline_synced_) {
    const auto& e = t[timeline_synced_];
    ctx_.log->add(e.cycle, e.entity, std::string(to_string(e.event)), e.detail);
    bump();
  }
}

bool AcceleratorSocket::idle() const {
  return TileSocket::idle() && l2_.idle() && acc_.idle() && fc_queue_.empty() && fc_inflight_.empty() && !held_irq_;
}

std::string AcceleratorSocket::dump() const {
  std::ostringstream os;
  os << TileSocket::dump() << "; accelerator " << to_string(acc_.phase()) << " loaded " << acc_.words_loaded()
     << " stored " << acc_.words_stored() << "; l2 outstanding " << l2_.outstanding();
  return os.str();
}

// ---------------------------------------------------------------------------
// ProcessorSocket
// ---------------------------------------------------------------------------

ProcessorSocket::ProcessorSocket(SocContext& ctx, TileId id, ProcessorScript script)
    : TileSocket(ctx, id), l2_(id, ctx.soc->config().cache, ctx.home), script_(std::move(script)) {
  if (script_.ops.empty()) finished_ = 0;
}

std::optional<Addr> ProcessorSocket::buffer(const std::string& name) const {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) return std::nullopt;
  return it->second.first;
}

std::uint64_t ProcessorSocket::buffer_bytes(const std::string& name) const {
  auto it = buffers_.find(name);
  return it == buffers_.end() ? 0 : it->second.second;
}

std::optional<Addr> ProcessorSocket::addr_of(const AddrRef& r) const {
  if (r.buffer.empty()) return r.offset;
  auto b = buffer(r.buffer);
  if (!b) return std::nullopt;
  return *b + r.offset;
}

void ProcessorSocket::finish_op(Cycle now, const std::string& what, std::string detail) {
  if (!what.empty()) ctx_.log->add(now, entity_, what, std::move(detail));
  wait_ = Wait::None;
  ++pc_;
  bump();
  if (pc_ >= script_.ops.size()) {
    finished_ = now;
    ctx_.log->add(now, entity_, "SCRIPT_DONE");
  }
}

void ProcessorSocket::init_buffer(Addr base, std::uint64_t bytes, BufferInit init, Word value, const std::string& name) {
  const std::uint64_t words = bytes / kWordBytes;
  std::mt19937_64 rng(ctx_.soc->config().seed ^ stable_hash(name));
  for (std::uint64_t i = 0; i < words; ++i) {
    const Addr a = base + i * kWordBytes;
    switch (init) {
      case BufferInit::None:
      case BufferInit::Zero: return;  // fresh DRAM reads as zero
      case BufferInit::Index: ctx_.store->write(a, i); break;
      case BufferInit::Random: ctx_.store->write(a, rng()); break;
      case BufferInit::Constant: ctx_.store->write(a, value); break;
    }
  }
}

bool ProcessorSocket::handle(const Message& m, Cycle now) {
  switch (m.type) {
    case MsgType::RegReadRsp:
      loads_.emplace_back(m.addr, m.arg);
      if (wait_ == Wait::RegRead) finish_op(now, "READ_REG", "value=" + std::to_string(m.arg));
      return true;
    case MsgType::Irq:
      irq_latencies_.push_back(now - m.tag);
      complete_irq(static_cast<TileId>(m.arg), now);
      return true;
    case MsgType::LlcFlushAck:
      if (--llc_flush_acks_ == 0 && wait_ == Wait::LlcFlush) wait_ = Wait::None;
      return true;
    case MsgType::RegWrite:
    case MsgType::RegRead:
      ctx_.log->warn(now, entity_, "NoRegisterFile", describe(m));
      if (m.type == MsgType::RegRead) {
        Message r;
        r.type = MsgType::RegReadRsp;
        r.dst = m.src;
        r.addr = m.addr;
        send(std::move(r));
      }
      return true;
    default:
      if (!is_l2_inbound(m.type)) throw SimError(entity_ + ": unexpected " + describe(m));
      if (!l2_.can_accept(m)) return false;
      l2_.receive(m, now);
      return true;
  }
}

void ProcessorSocket::complete_irq(TileId accel, Cycle now) {
  if (run_) {
    for (std::size_t i = 0; i < run_->invs.size(); ++i) {
      if (run_->state[i] != InvState::Started || ctx_.soc->id_of(run_->invs[i].accelerator) != accel) continue;
      run_->state[i] = InvState::Done;
      inv_times_[run_->invs[i].name].second = now;
      ctx_.log->add(now, entity_, "IRQ_RECEIVED", run_->invs[i].name);
      bump();
      schedule_ready(now);
      return;
    }
  }
  if (wait_ == Wait::Irq && wait_irq_tile_ == accel) {
    finish_op(now, "IRQ_RECEIVED", "from=" + std::to_string(accel));
    return;
  }
  ctx_.log->warn(now, entity_, "IrqWithoutWait", "from=" + std::to_string(accel));
  pending_irqs_.insert(accel);
}

void ProcessorSocket::append_invocation(std::size_t i) {
  auto& run = *run_;
  const auto& inv = run.invs[i];
  const TileId acc = ctx_.soc->id_of(inv.accelerator);
  const CoherenceMode mode = inv.mode.value_or(ctx_.soc->tile(acc).coherence_mode.value_or(CoherenceMode::NonCoherentDMA));
  run.state[i] = InvState::Started;

  using K = MicroOp::Kind;
  if (run.flush_protocol) {
    // Software keeps non-coherent and LLC-coherent DMA correct by flushing
    // the private cache, and for non-coherent DMA also the LLC range.
    if (mode == CoherenceMode::NonCoherentDMA || mode == CoherenceMode::LLCCoherentDMA) {
      run.micro.push_back({K::FlushL2, kNoTile, 0, 0, {}});
    }
    if (mode == CoherenceMode::NonCoherentDMA) {
      for (const auto* name : {&inv.src, &inv.dst}) {
        if (name->empty()) continue;
        const Addr base = buffers_.at(*name).first;
        const std::uint64_t bytes = buffers_.at(*name).second;
        run.micro.push_back({K::LlcFlush, ctx_.home.home(base), base, bytes, {}});
      }
    }
  }
  run.micro.push_back({K::Invoke, acc, 0, 0, inv.name});
  TileId producer = kNoTile;
  TileId consumer = kNoTile;
  for (const auto& other : run.invs) {
    if (other.name == inv.p2p_from) producer = ctx_.soc->id_of(other.accelerator);
    if (other.p2p_from == inv.name) consumer = ctx_.soc->id_of(other.accelerator);
  }
  const auto reg = [&](Addr off, Word v) { run.micro.push_back({K::WriteReg, acc, off, v, {}}); };
  reg(kRegSrc, inv.src.empty() ? 0 : buffers_.at(inv.src).first);
  reg(kRegDst, inv.dst.empty() ? 0 : buffers_.at(inv.dst).first);
  reg(kRegMode, static_cast<Word>(mode));
  reg(kRegP2PSrc, producer == kNoTile ? 0 : static_cast<Word>(producer) + 1);
  reg(kRegP2PDst, consumer == kNoTile ? 0 : static_cast<Word>(consumer) + 1);
  reg(kRegIrqOwner, id_);
  reg(kRegCmd, 1);
}

void ProcessorSocket::schedule_ready(Cycle) {
  auto& run = *run_;
  const auto index_of = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < run.invs.size(); ++i)
      if (run.invs[i].name == name) return i;
    return std::nullopt;
  };
  const auto deps_done = [&](std::size_t i) {
    for (const auto& d : run.invs[i].after) {
      auto j = index_of(d);
      if (j && run.state[*j] != InvState::Done) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < run.invs.size(); ++i) {
    if (run.state[i] != InvState::Waiting || !deps_done(i)) continue;
    // P2P-bound pairs start together.
    std::optional<std::size_t> partner;
    if (!run.invs[i].p2p_from.empty()) partner = index_of(run.invs[i].p2p_from);
    for (std::size_t j = 0; j < run.invs.size(); ++j)
      if (run.invs[j].p2p_from == run.invs[i].name) partner = j;
    if (partner && run.state[*partner] == InvState::Waiting && !deps_done(*partner)) continue;
    append_invocation(i);
    if (partner && run.state[*partner] == InvState::Waiting) append_invocation(*partner);
  }
}

void ProcessorSocket::exec_micro(Cycle now) {
  auto& run = *run_;
  using K = MicroOp::Kind;
  while (!run.micro.empty()) {
    MicroOp& op = run.micro.front();
    switch (op.kind) {
      case K::FlushL2: {
        L2Request r;
        r.id = next_l2_id_++;
        r.op = L2Op::FlushAll;
        if (!l2_.issue(r, now)) return;
        note_shortcut();
        ctx_.log->add(now, entity_, "FLUSH_L2");
        wait_ = Wait::L2;
        run.micro.pop_front();
        return;
      }
      case K::LlcFlush: {
        Message m;
        m.type = MsgType::LlcFlush;
        m.dst = op.tile;
        m.addr = op.addr;
        m.arg = op.value;
        ctx_.log->add(now, entity_, "LLC_FLUSH", hex(op.addr) + "+" + std::to_string(op.value));
        send(std::move(m));
        ++llc_flush_acks_;
        run.micro.pop_front();
        if (run.micro.empty() || run.micro.front().kind != K::LlcFlush) wait_ = Wait::LlcFlush;
        return;
      }
      case K::Invoke:
        inv_times_[op.inv] = {now, 0};
        ctx_.log->add(now, entity_, "INVOKE", op.inv);
        run.micro.pop_front();
        continue;
      case K::WriteReg: {
        Message m;
        m.type = MsgType::RegWrite;
        m.dst = op.tile;
        m.addr = op.addr;
        m.arg = op.value;
        send(std::move(m));
        run.micro.pop_front();
        return;
      }
    }
  }
  if (std::all_of(run.state.begin(), run.state.end(), [](InvState s) { return s == InvState::Done; })) {
    const std::string name = script_.ops[pc_].name;
    run_.reset();
    finish_op(now, "ESP_RUN_DONE", name);
  }
}

void ProcessorSocket::exec_op(const ScriptOp& op, Cycle now) {
  const auto issue_l2 = [&](L2Op kind, Addr a, Word value) {
    L2Request r;
    r.id = next_l2_id_++;
    r.op = kind;
    r.addr = a;
    if (kind == L2Op::Write) r.data = {value};
    if (!l2_.issue(r, now)) return false;
    pending_load_addr_ = a;
    wait_ = Wait::L2;
    return true;
  };
  switch (op.kind) {
    case OpKind::WriteReg:
    case OpKind::ReadReg: {
      Message m;
      m.type = op.kind == OpKind::WriteReg ? MsgType::RegWrite : MsgType::RegRead;
      m.dst = ctx_.soc->id_of(op.tile);
      m.addr = op.reg_offset;
      m.arg = op.value;
      send(std::move(m));
      if (op.kind == OpKind::ReadReg) wait_ = Wait::RegRead;
      else finish_op(now, "WRITE_REG", std::to_string(op.reg_offset) + "=" + std::to_string(op.value));
      return;
    }
    case OpKind::Load:
    case OpKind::Store: {
      const auto a = addr_of(op.addr);
      const Resolved r = a ? resolve_address(*ctx_.map, *a) : Resolved{};
      if (r.kind == Resolved::Kind::Unmapped) {
        ctx_.log->warn(now, entity_, "UnmappedAddress", a ? hex(*a) : op.addr.buffer);
        finish_op(now, "");
        return;
      }
      if (r.kind == Resolved::Kind::Register) {
        Message m;
        m.type = op.kind == OpKind::Load ? MsgType::RegRead : MsgType::RegWrite;
        m.dst = r.tile;
        m.addr = r.offset;
        m.arg = op.value;
        send(std::move(m));
        if (op.kind == OpKind::Load) wait_ = Wait::RegRead;
        else finish_op(now, "");
        return;
      }
      issue_l2(op.kind == OpKind::Load ? L2Op::Read : L2Op::Write, *a, op.value);
      return;
    }
    case OpKind::FlushL2: {
      L2Request r;
      r.id = next_l2_id_++;
      r.op = L2Op::FlushAll;
      if (l2_.issue(r, now)) {
        note_shortcut();  // flush control is reached through the local port
        wait_ = Wait::L2;
      }
      return;
    }
    case OpKind::EspAlloc: {
      const std::uint64_t align = static_cast<std::uint64_t>(ctx_.soc->config().cache.line_size_bytes);
      const std::uint64_t bytes = (op.bytes + align - 1) / align * align;
      auto base = ctx_.alloc->allocate(bytes, op.partition);
      if (!base) {
        ctx_.log->warn(now, entity_, "AllocExhausted", op.name + " " + std::to_string(op.bytes));
        finish_op(now, "");
        return;
      }
      buffers_[op.name] = {*base, op.bytes};
      init_buffer(*base, op.bytes, op.init, op.value, op.name);
      finish_op(now, "ESP_ALLOC", op.name + "=" + hex(*base) + "+" + std::to_string(op.bytes));
      return;
    }
    case OpKind::EspFree:
      buffers_.erase(op.name);
      finish_op(now, "ESP_FREE", op.name);
      return;
    case OpKind::EspRun: {
      RunState run;
      run.invs = op.invocations;
      run.state.assign(run.invs.size(), InvState::Waiting);
      run.flush_protocol = op.flush_protocol;
      run_ = std::move(run);
      ctx_.log->add(now, entity_, "ESP_RUN", op.name);
      schedule_ready(now);
      exec_micro(now);
      return;
    }
    case OpKind::WaitIrq: {
      const TileId t = ctx_.soc->id_of(op.tile);
      if (auto it = pending_irqs_.find(t); it != pending_irqs_.end()) {
        pending_irqs_.erase(it);
        finish_op(now, "IRQ_RECEIVED", "from=" + std::to_string(t));
        return;
      }
      wait_ = Wait::Irq;
      wait_irq_tile_ = t;
      return;
    }
    case OpKind::Barrier: {
      auto& b = *ctx_.barrier;
      if (++b.arrived >= b.participants) {
        b.arrived = 0;
        ++b.generation;
        finish_op(now, "BARRIER");
        return;
      }
      wait_ = Wait::Barrier;
      wait_barrier_gen_ = b.generation;
      return;
    }
  }
}

void ProcessorSocket::step_caches(Cycle now) {
  l2_.step(now);
  for (const auto& c : l2_.completions()) {
    if (wait_ != Wait::L2) throw SimError(entity_ + ": L2 completion with no waiting operation");
    if (run_) {
      wait_ = Wait::None;  // driver flush inside esp_run
      bump();
      continue;
    }
    if (c.op == L2Op::Read) {
      loads_.emplace_back(pending_load_addr_, c.data.at(0));
      finish_op(now, "LOAD", hex(pending_load_addr_) + "=" + std::to_string(c.data.at(0)));
    } else if (c.op == L2Op::Write) {
      finish_op(now, "STORE", hex(pending_load_addr_));
    } else {
      finish_op(now, "FLUSH_L2");
    }
  }
  l2_.completions().clear();

  if (wait_ == Wait::Barrier && ctx_.barrier->generation != wait_barrier_gen_) finish_op(now, "BARRIER");
  if (wait_ == Wait::None) {
    if (run_) exec_micro(now);
    else if (pc_ < script_.ops.size()) exec_op(script_.ops[pc_], now);
  }
  drain(l2_.outbox());
}

bool ProcessorSocket::idle() const { return TileSocket::idle() && l2_.idle(); }

std::string ProcessorSocket::dump() const {
  std::ostringstream os;
  os << TileSocket::dump() << "; script op " << pc_ << "/" << script_.ops.size() << " wait " << static_cast<int>(wait_)
     << "; l2 outstanding " << l2_.outstanding();
  if (run_) os << "; esp_run micro-ops " << run_->micro.size();
  return os.str();
}

}  // namespace espsim
