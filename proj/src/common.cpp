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

#include "espsim/common.hpp"

namespace espsim {

std::string to_string(Position p) {
  return "(" + std::to_string(p.row) + "," + std::to_string(p.col) + ")";
}

std::string_view to_string(Port p) {
  switch (p) {
    case Port::North: return "N";
    case Port::East: return "E";
    case Port::South: return "S";
    case Port::West: return "W";
    case Port::Local: return "L";
  }
  return "?";
}

std::string_view to_string(TileKind k) {
  switch (k) {
    case TileKind::Processor: return "processor";
    case TileKind::Accelerator: return "accelerator";
    case TileKind::Memory: return "memory";
    case TileKind::Auxiliary: return "aux";
    case TileKind::Empty: return "empty";
  }
  return "?";
}

std::optional<TileKind> tile_kind_from_string(std::string_view s) {
  if (s == "processor" || s == "cpu") return TileKind::Processor;
  if (s == "accelerator" || s == "acc") return TileKind::Accelerator;
  if (s == "memory" || s == "mem") return TileKind::Memory;
  if (s == "aux" || s == "auxiliary") return TileKind::Auxiliary;
  if (s == "empty") return TileKind::Empty;
  return std::nullopt;
}

std::string_view to_string(CoherenceMode m) {
  switch (m) {
    case CoherenceMode::FullyCoherent: return "fully-coherent";
    case CoherenceMode::CoherentDMA: return "coherent-dma";
    case CoherenceMode::LLCCoherentDMA: return "llc-coherent-dma";
    case CoherenceMode::NonCoherentDMA: return "non-coherent-dma";
  }
  return "?";
}

std::optional<CoherenceMode> coherence_mode_from_string(std::string_view s) {
  if (s == "fully-coherent") return CoherenceMode::FullyCoherent;
  if (s == "coherent-dma") return CoherenceMode::CoherentDMA;
  if (s == "llc-coherent-dma") return CoherenceMode::LLCCoherentDMA;
  if (s == "non-coherent-dma") return CoherenceMode::NonCoherentDMA;
  return std::nullopt;
}

std::string_view to_string(MessageClass c) {
  switch (c) {
    case MessageClass::CohReq: return "CohReq";
    case MessageClass::CohFwd: return "CohFwd";
    case MessageClass::CohRsp: return "CohRsp";
    case MessageClass::DmaReq: return "DmaReq";
    case MessageClass::DmaRsp: return "DmaRsp";
    case MessageClass::IoIrq: return "IoIrq";
  }
  return "?";
}

}  // namespace espsim
