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

#include "espsim/message.hpp"

#include <sstream>

namespace espsim {

MessageClass class_of(MsgType t) {
  switch (t) {
    case MsgType::GetS:
    case MsgType::GetM:
    case MsgType::PutM: return MessageClass::CohReq;
    case MsgType::FwdGetS:
    case MsgType::FwdGetM:
    case MsgType::Inv:
    case MsgType::Recall: return MessageClass::CohFwd;
    case MsgType::Data:
    case MsgType::InvAck:
    case MsgType::PutAck: return MessageClass::CohRsp;
    case MsgType::DmaRead:
    case MsgType::DmaWrite:
    case MsgType::P2PReq:
    case MsgType::P2PData: return MessageClass::DmaReq;
    case MsgType::DmaData:
    case MsgType::DmaWriteAck: return MessageClass::DmaRsp;
    case MsgType::RegWrite:
    case MsgType::RegRead:
    case MsgType::RegReadRsp:
    case MsgType::AccDone:
    case MsgType::Irq:
    case MsgType::LlcFlush:
    case MsgType::LlcFlushAck: return MessageClass::IoIrq;
  }
  return MessageClass::IoIrq;
}

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::GetS: return "GetS";
    case MsgType::GetM: return "GetM";
    case MsgType::PutM: return "PutM";
    case MsgType::FwdGetS: return "FwdGetS";
    case MsgType::FwdGetM: return "FwdGetM";
    case MsgType::Inv: return "Inv";
    case MsgType::Recall: return "Recall";
    case MsgType::Data: return "Data";
    case MsgType::InvAck: return "InvAck";
    case MsgType::PutAck: return "PutAck";
    case MsgType::DmaRead: return "DmaRead";
    case MsgType::DmaWrite: return "DmaWrite";
    case MsgType::P2PReq: return "P2PReq";
    case MsgType::P2PData: return "P2PData";
    case MsgType::DmaData: return "DmaData";
    case MsgType::DmaWriteAck: return "DmaWriteAck";
    case MsgType::RegWrite: return "RegWrite";
    case MsgType::RegRead: return "RegRead";
    case MsgType::RegReadRsp: return "RegReadRsp";
    case MsgType::AccDone: return "AccDone";
    case MsgType::Irq: return "Irq";
    case MsgType::LlcFlush: return "LlcFlush";
    case MsgType::LlcFlushAck: return "LlcFlushAck";
  }
  return "?";
}

std::string describe(const Message& m) {
  std::ostringstream os;
  os << to_string(m.type) << " src=" << m.src << " dst=" << m.dst << " addr=0x" << std::hex << m.addr << std::dec;
  if (m.requester != kNoTile) os << " req=" << m.requester;
  if (m.len != 0) os << " len=" << m.len;
  if (!m.data.empty()) os << " words=" << m.data.size();
  return os.str();
}

}  // namespace espsim
