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

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace espsim {

using Cycle = std::uint64_t;
using Addr = std::uint64_t;
using Word = std::uint64_t;

/// Row-major index of a tile in the grid. Doubles as the coherence agent id.
using TileId = std::uint16_t;

inline constexpr std::size_t kWordBytes = 8;
inline constexpr TileId kNoTile = 0xffff;

struct Position {
  int row = 0;
  int col = 0;

  auto operator<=>(const Position&) const = default;
};

std::string to_string(Position p);

inline int manhattan(Position a, Position b) {
  return (a.row > b.row ? a.row - b.row : b.row - a.row) +
         (a.col > b.col ? a.col - b.col : b.col - a.col);
}

/// Router ports in the fixed traversal order used for tie-breaking.
enum class Port : std::uint8_t { North = 0, East = 1, South = 2, West = 3, Local = 4 };
inline constexpr int kNumPorts = 5;

std::string_view to_string(Port p);

enum class TileKind : std::uint8_t { Processor, Accelerator, Memory, Auxiliary, Empty };

std::string_view to_string(TileKind k);
std::optional<TileKind> tile_kind_from_string(std::string_view s);

enum class CoherenceMode : std::uint8_t {
  FullyCoherent = 0,
  CoherentDMA = 1,
  LLCCoherentDMA = 2,
  NonCoherentDMA = 3,
};

std::string_view to_string(CoherenceMode m);
std::optional<CoherenceMode> coherence_mode_from_string(std::string_view s);

/// Traffic classes; each is bound to exactly one NoC plane.
enum class MessageClass : std::uint8_t { CohReq, CohFwd, CohRsp, DmaReq, DmaRsp, IoIrq };
inline constexpr int kNumMessageClasses = 6;

std::string_view to_string(MessageClass c);

/// NoC planes are numbered 1..planes, following the hardware naming.
using PlaneId = int;

/// Raised for violations of internal invariants (wrong plane, protocol bug).
class SimError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace espsim
