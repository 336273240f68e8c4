// Copyright 2026 The StageFuzz Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Random valid graph generator. Used as seed material for synthesis, as the
// pattern-free baseline, and by property tests.

#pragma once

#include <cstdint>
#include <random>

#include "stagefuzz/graph.h"

namespace stagefuzz::gen {

struct GraphGenOptions {
  int min_nodes = 5;
  int max_nodes = 30;
  int64_t max_elements = 256;  // per tensor
  // Deliberately plant rewrite triggers: identity constants, inverse
  // transposes, identity reshapes and casts, cloned nodes. Off for the
  // pattern-free synthesis baseline and its seed graphs.
  bool rewrite_hints = true;
};

graph::Graph RandomGraph(uint64_t seed, const GraphGenOptions& options = {});

// Constant with random contents drawn like RandomTensor. With `nonzero`,
// every element is nonzero (safe integer divisor).
std::vector<double> RandomPayload(const TensorType& type, std::mt19937_64& rng,
                                  bool nonzero = false);

}  // namespace stagefuzz::gen
