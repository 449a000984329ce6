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

#include "espsim/dram.hpp"

#include <algorithm>

namespace espsim {

std::vector<Word> DramStore::read_range(Addr a, std::uint32_t words) const {
  std::vector<Word> out(words);
  for (std::uint32_t i = 0; i < words; ++i) out[i] = read(a + i * kWordBytes);
  return out;
}

void DramStore::write_range(Addr a, const std::vector<Word>& data) {
  for (std::size_t i = 0; i < data.size(); ++i) write(a + i * kWordBytes, data[i]);
}

void DramChannel::enqueue(DramRequest req, Cycle now) {
  const std::uint32_t words = req.write ? static_cast<std::uint32_t>(req.data.size()) : req.words;
  const Cycle xfer = (words + static_cast<Cycle>(bw_) - 1) / static_cast<Cycle>(bw_);
  Cycle done = now + static_cast<Cycle>(latency_) + xfer;
  if (any_) done = std::max(done, last_done_ + xfer);
  busy_cycles_ += xfer;
  last_done_ = done;
  any_ = true;
  ++requests_;
  queue_.push_back({std::move(req), done});
}

std::vector<DramResponse> DramChannel::step(Cycle now) {
  depth_accum_ += queue_.size();
  ++sampled_cycles_;
  std::vector<DramResponse> out;
  while (!queue_.empty() && queue_.front().done <= now) {
    auto& p = queue_.front();
    DramResponse r;
    r.source = p.req.source;
    r.write = p.req.write;
    r.addr = p.req.addr;
    r.tag = p.req.tag;
    r.cycle = p.done;
    if (p.req.write) {
      store_->write_range(p.req.addr, p.req.data);
      words_written_ += p.req.data.size();
      if (p.req.want_ack) out.push_back(std::move(r));
    } else {
      r.data = store_->read_range(p.req.addr, p.req.words);
      words_read_ += p.req.words;
      out.push_back(std::move(r));
    }
    queue_.pop_front();
  }
  return out;
}

}  // namespace espsim
