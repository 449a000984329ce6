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

#include <string>
#include <vector>

#include "espsim/common.hpp"

namespace espsim {

enum class MsgType : std::uint8_t {
  // CohReq
  GetS,
  GetM,
  PutM,
  // CohFwd
  FwdGetS,
  FwdGetM,
  Inv,
  Recall,
  // CohRsp
  Data,
  InvAck,
  PutAck,
  // DmaReq
  DmaRead,
  DmaWrite,
  P2PReq,
  P2PData,
  // DmaRsp
  DmaData,
  DmaWriteAck,
  // IoIrq
  RegWrite,
  RegRead,
  RegReadRsp,
  AccDone,
  Irq,
  LlcFlush,     // write back and drop an LLC address range
  LlcFlushAck,
};

MessageClass class_of(MsgType t);
std::string_view to_string(MsgType t);

/// Permission carried by a Data message from the LLC to an L2.
enum class Grant : std::uint8_t { None, Shared, Exclusive, Modified };

/// Everything a NoC packet carries: the header fields the proxies need
/// plus the payload words. One payload word travels in one flit.
struct Message {
  MsgType type = MsgType::GetS;
  TileId src = kNoTile;
  TileId dst = kNoTile;
  TileId requester = kNoTile;  // original requester for forwarded traffic
  Addr addr = 0;               // line address, DMA address, or register offset
  std::uint32_t len = 0;       // DMA length in words
  Grant grant = Grant::None;
  bool dirty = false;
  std::uint64_t arg = 0;       // register value, coherence mode, IRQ owner...
  std::uint64_t tag = 0;       // request tag echoed in the response
  std::vector<Word> data;

  bool operator==(const Message&) const = default;
};

std::string describe(const Message& m);

}  // namespace espsim
