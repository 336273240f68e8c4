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

#pragma once

#include <array>
#include <bitset>
#include <string>
#include <string_view>
#include <vector>

namespace stagefuzz {

// Flag-gated defects injected into the reference compiler. Loader bugs
// (L*) live in the model frontend, H* in graph passes, B* in loop passes.
enum class BugId {
  kL1, kL2, kL3, kL4,
  kH1, kH2, kH3, kH4,
  kB1, kB2, kB3, kB4,
};

inline constexpr int kNumBugs = 12;

enum class Stage { kLoader, kHighLevel, kLowLevel };

std::string_view StageName(Stage stage);

struct SeededBug {
  BugId id;
  std::string_view name;
  Stage stage;
  std::string_view description;
};

const std::array<SeededBug, kNumBugs>& SeededBugCatalog();

// Immutable set of enabled bugs; passed by value into every pass so that
// concurrent workers never share toggles.
class BugSet {
 public:
  BugSet() = default;

  bool Has(BugId id) const { return bits_.test(static_cast<size_t>(id)); }
  BugSet With(BugId id) const {
    BugSet copy = *this;
    copy.bits_.set(static_cast<size_t>(id));
    return copy;
  }
  bool Empty() const { return bits_.none(); }
  std::vector<BugId> Enabled() const;
  std::string ToString() const;

  // Parses "L1,H2,B4" (case-insensitive, "all" enables every bug). Throws
  // Error(kConfigError) on unknown names.
  static BugSet Parse(std::string_view list);
  // Reads STAGEFUZZ_BUGS; empty set when unset.
  static BugSet FromEnvironment();
  static BugSet ForStage(Stage stage);

  friend bool operator==(const BugSet&, const BugSet&) = default;

 private:
  std::bitset<kNumBugs> bits_;
};

std::string_view BugName(BugId id);

}  // namespace stagefuzz
