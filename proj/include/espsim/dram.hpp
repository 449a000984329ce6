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

#include <deque>
#include <unordered_map>
#include <vector>

#include "espsim/common.hpp"

namespace espsim {

/// Sparse word-addressed backing store. Unwritten words read as zero.
class DramStore {
 public:
  Word read(Addr a) const {
    auto it = words_.find(a);
    return it == words_.end() ? 0 : it->second;
  }
  void write(Addr a, Word w) { words_[a] = w; }
  std::vector<Word> read_range(Addr a, std::uint32_t words) const;
  void write_range(Addr a, const std::vector<Word>& data);

 private:
  std::unordered_map<Addr, Word> words_;
};

enum class DramSource : std::uint8_t { Llc, Bypass };

struct DramRequest {
  DramSource source = DramSource::Llc;
  bool write = false;
  bool want_ack = true;  // writes only; reads always complete
  Addr addr = 0;
  std::uint32_t words = 0;
  std::vector<Word> data;  // writes
  std::uint64_t tag = 0;
};

struct DramResponse {
  DramSource source = DramSource::Llc;
  bool write = false;
  Addr addr = 0;
  std::vector<Word> data;  // reads
  std::uint64_t tag = 0;
  Cycle cycle = 0;
};

/// One memory tile's DRAM channel: FIFO, fixed latency plus serialization.
/// Request k completes at
///   max(arrival_k + latency + ceil(words_k / bw), completion_{k-1} + ceil(words_k / bw)).
class DramChannel {
 public:
  DramChannel(int latency_cycles, int words_per_cycle, DramStore* store)
      : latency_(latency_cycles), bw_(words_per_cycle), store_(store) {}

  void enqueue(DramRequest req, Cycle now);
  /// Completes every request due at or before `now`, in FIFO order.
  std::vector<DramResponse> step(Cycle now);

  bool idle() const { return queue_.empty(); }
  std::size_t queue_depth() const { return queue_.size(); }
  std::uint64_t busy_cycles() const { return busy_cycles_; }
  std::uint64_t words_read() const { return words_read_; }
  std::uint64_t words_written() const { return words_written_; }
  std::uint64_t requests() const { return requests_; }
  /// Sum over cycles of queue depth, for a mean.
  std::uint64_t depth_accum() const { return depth_accum_; }
  std::uint64_t sampled_cycles() const { return sampled_cycles_; }

 private:
  struct Pending {
    DramRequest req;
    Cycle done;
  };
  int latency_;
  int bw_;
  DramStore* store_;
  std::deque<Pending> queue_;
  Cycle last_done_ = 0;
  bool any_ = false;
  std::uint64_t busy_cycles_ = 0;
  std::uint64_t words_read_ = 0;
  std::uint64_t words_written_ = 0;
  std::uint64_t requests_ = 0;
  std::uint64_t depth_accum_ = 0;
  std::uint64_t sampled_cycles_ = 0;
};

}  // namespace espsim
