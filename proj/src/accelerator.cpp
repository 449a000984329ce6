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

#include "espsim/accelerator.hpp"

#include <utility>

namespace espsim {

std::string_view to_string(AccPhase p) {
  switch (p) {
    case AccPhase::Idle: return "Idle";
    case AccPhase::Config: return "Config";
    case AccPhase::Running: return "Running";
    case AccPhase::Done: return "Done";
  }
  return "?";
}

std::string_view to_string(AccEvent e) {
  switch (e) {
    case AccEvent::Cfg: return "CFG";
    case AccEvent::LoadIssue: return "LOAD_ISSUE";
    case AccEvent::LoadDone: return "LOAD_DONE";
    case AccEvent::ComputeStart: return "COMPUTE_START";
    case AccEvent::ComputeDone: return "COMPUTE_DONE";
    case AccEvent::StoreIssue: return "STORE_ISSUE";
    case AccEvent::StoreDone: return "STORE_DONE";
    case AccEvent::Irq: return "IRQ";
    case AccEvent::Error: return "ERROR";
  }
  return "?";
}

namespace {

std::size_t reg_index(Addr offset) { return static_cast<std::size_t>(offset / 8); }

std::string burst_detail(int k) { return "burst=" + std::to_string(k); }

}  // namespace

Accelerator::Accelerator(TileId tile, std::string name, AcceleratorParams params)
    : tile_(tile), name_(std::move(name)), params_(std::move(params)) {
  if (params_.burst_len_words <= 0 || params_.total_bursts() <= 0 || params_.compute_cycles_per_burst <= 0 ||
      params_.plm_words < 2 * params_.burst_len_words || params_.store_burst_words() <= 0) {
    throw SimError("accelerator " + name_ + ": invalid parameters");
  }
}

void Accelerator::event(Cycle now, AccEvent e, std::string detail) {
  if (e == AccEvent::Error) ++errors_;
  timeline_.push_back({now, name_, e, std::move(detail)});
}

Addr Accelerator::burst_addr(Addr base, int burst, int words) const {
  return base + static_cast<Addr>(burst) * static_cast<Addr>(words) * kWordBytes;
}

void Accelerator::write_register(Addr offset, Word value, Cycle now) {
  if (offset % 8 != 0 || reg_index(offset) >= kRegCount) {
    event(now, AccEvent::Error, "BadRegisterOffset offset=" + std::to_string(offset));
    return;
  }
  if (offset == kRegStatus) {
    event(now, AccEvent::Error, "BadRegisterOffset status is read-only");
    return;
  }
  if (phase_ == AccPhase::Running) {
    event(now, AccEvent::Error, offset == kRegCmd ? "StartWhileRunning" : "RegisterWriteWhileRunning");
    return;
  }
  if (offset == kRegCmd) {
    if (value == 1) start(now);
    return;
  }
  if (offset == kRegMode && value > static_cast<Word>(CoherenceMode::NonCoherentDMA)) {
    event(now, AccEvent::Error, "BadCoherenceMode value=" + std::to_string(value));
    return;
  }
  regs_[reg_index(offset)] = value;
  written_[reg_index(offset)] = true;
  phase_ = AccPhase::Config;
}

std::optional<Word> Accelerator::read_register(Addr offset) const {
  if (offset % 8 != 0 || reg_index(offset) >= kRegCount) return std::nullopt;
  if (offset == kRegStatus) return static_cast<Word>(phase_);
  return regs_[reg_index(offset)];
}

void Accelerator::start(Cycle now) {
  const bool p2p_in = regs_[reg_index(kRegP2PSrc)] != 0;
  const bool p2p_out = regs_[reg_index(kRegP2PDst)] != 0;
  if ((!p2p_in && !written_[reg_index(kRegSrc)]) || (!p2p_out && !written_[reg_index(kRegDst)]) ||
      !written_[reg_index(kRegIrqOwner)]) {
    event(now, AccEvent::Error, "StartWhileUnconfigured");
    return;
  }
  mode_ = static_cast<CoherenceMode>(regs_[reg_index(kRegMode)]);
  phase_ = AccPhase::Running;
  started_ = now;
  in_ = {HalfState::Free, HalfState::Free};
  outh_ = {HalfState::Free, HalfState::Free};
  next_load_ = next_compute_ = next_store_ = stored_ = 0;
  load_busy_ = store_busy_ = false;
  compute_done_.reset();
  ++invocations_;
  event(now, AccEvent::Cfg, std::string("mode=") + std::string(to_string(mode_)));
}

void Accelerator::load_data(std::uint64_t tag, const std::vector<Word>& data, Cycle now) {
  if (phase_ != AccPhase::Running || !load_busy_ || tag != static_cast<std::uint64_t>(next_load_)) {
    throw SimError("accelerator " + name_ + ": unexpected load data for burst " + std::to_string(tag));
  }
  if (data.size() != static_cast<std::size_t>(params_.burst_len_words)) {
    throw SimError("accelerator " + name_ + ": load burst has " + std::to_string(data.size()) + " words");
  }
  const auto h = static_cast<std::size_t>(next_load_ % 2);
  in_data_[h] = data;
  in_[h] = HalfState::Full;
  load_busy_ = false;
  words_loaded_ += data.size();
  event(now, AccEvent::LoadDone, burst_detail(next_load_));
  ++next_load_;
}

void Accelerator::store_ack(std::uint64_t tag, Cycle now) {
  if (phase_ != AccPhase::Running || !store_busy_ || tag != static_cast<std::uint64_t>(next_store_)) {
    throw SimError("accelerator " + name_ + ": unexpected store ack for burst " + std::to_string(tag));
  }
  const auto h = static_cast<std::size_t>(next_store_ % 2);
  outh_[h] = HalfState::Free;
  store_busy_ = false;
  words_stored_ += static_cast<std::uint64_t>(params_.store_burst_words());
  event(now, AccEvent::StoreDone, burst_detail(next_store_));
  ++next_store_;
  ++stored_;
}

void Accelerator::p2p_credit(TileId from, std::uint32_t words, Cycle now) {
  const Word consumer = regs_[reg_index(kRegP2PDst)];
  if (consumer != 0 && consumer != static_cast<Word>(from) + 1) {
    event(now, AccEvent::Error, "UnexpectedP2PCredit from=" + std::to_string(from));
    return;
  }
  if (words != static_cast<std::uint32_t>(params_.store_burst_words())) {
    event(now, AccEvent::Error,
          "GranularityMismatch consumer burst " + std::to_string(words) + " producer burst " +
              std::to_string(params_.store_burst_words()));
    return;
  }
  ++credits_;
}

void Accelerator::step(Cycle now) {
  if (phase_ != AccPhase::Running || now <= started_) return;
  const int total = params_.total_bursts();

  if (compute_done_ && *compute_done_ <= now) {
    const int k = next_compute_;
    const auto h = static_cast<std::size_t>(k % 2);
    const auto& src = in_data_[h];
    auto& dst = out_data_[h];
    dst.resize(static_cast<std::size_t>(params_.store_burst_words()));
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = params_.apply(src[j % src.size()]);
    in_[h] = HalfState::Free;
    outh_[h] = HalfState::Full;
    compute_done_.reset();
    event(now, AccEvent::ComputeDone, burst_detail(k));
    ++next_compute_;
  }

  const Word consumer = regs_[reg_index(kRegP2PDst)];
  if (!store_busy_ && next_store_ < total) {
    const auto h = static_cast<std::size_t>(next_store_ % 2);
    if (outh_[h] == HalfState::Full && (consumer == 0 || credits_ > 0)) {
      AccRequest r;
      r.tag = static_cast<std::uint64_t>(next_store_);
      r.data = out_data_[h];
      r.words = static_cast<std::uint32_t>(r.data.size());
      r.mode = mode_;
      if (consumer != 0) {
        --credits_;
        r.kind = AccRequest::Kind::P2PSend;
        r.peer = static_cast<TileId>(consumer - 1);
      } else {
        r.kind = AccRequest::Kind::Write;
        r.addr = burst_addr(regs_[reg_index(kRegDst)], next_store_, params_.store_burst_words());
      }
      out_.push_back(std::move(r));
      outh_[h] = HalfState::Storing;
      store_busy_ = true;
      event(now, AccEvent::StoreIssue, burst_detail(next_store_));
    }
  }

  if (!compute_done_ && next_compute_ < total) {
    const auto h = static_cast<std::size_t>(next_compute_ % 2);
    if (in_[h] == HalfState::Full && outh_[h] == HalfState::Free) {
      in_[h] = HalfState::Computing;
      outh_[h] = HalfState::Computing;
      compute_done_ = now + static_cast<Cycle>(params_.compute_cycles_per_burst);
      event(now, AccEvent::ComputeStart, burst_detail(next_compute_));
    }
  }

  if (!load_busy_ && next_load_ < total) {
    const auto h = static_cast<std::size_t>(next_load_ % 2);
    if (in_[h] == HalfState::Free) {
      AccRequest r;
      r.tag = static_cast<std::uint64_t>(next_load_);
      r.words = static_cast<std::uint32_t>(params_.burst_len_words);
      r.mode = mode_;
      const Word producer = regs_[reg_index(kRegP2PSrc)];
      if (producer != 0) {
        r.kind = AccRequest::Kind::P2PCredit;
        r.peer = static_cast<TileId>(producer - 1);
      } else {
        r.kind = AccRequest::Kind::Read;
        r.addr = burst_addr(regs_[reg_index(kRegSrc)], next_load_, params_.burst_len_words);
      }
      out_.push_back(std::move(r));
      in_[h] = HalfState::Loading;
      load_busy_ = true;
      event(now, AccEvent::LoadIssue, burst_detail(next_load_));
    } else {
      ++load_stalls_;
    }
  }

  if (stored_ == total) {
    phase_ = AccPhase::Done;
    irq_ = static_cast<TileId>(regs_[reg_index(kRegIrqOwner)]);
    event(now, AccEvent::Irq, "owner=" + std::to_string(*irq_));
  }
}

std::optional<TileId> Accelerator::take_irq() {
  auto r = irq_;
  irq_.reset();
  return r;
}

}  // namespace espsim
