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

#include "stagefuzz/bugs.h"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "stagefuzz/error.h"

namespace stagefuzz {

std::string_view StageName(Stage stage) {
  switch (stage) {
    case Stage::kLoader: return "loader";
    case Stage::kHighLevel: return "hlopt";
    case Stage::kLowLevel: return "llopt";
  }
  return "?";
}

const std::array<SeededBug, kNumBugs>& SeededBugCatalog() {
  static const std::array<SeededBug, kNumBugs> kCatalog = {{
      {BugId::kL1, "L1", Stage::kLoader, "Conv2D asymmetric pad ignored"},
      {BugId::kL2, "L2", Stage::kLoader, "Cast dropped on I32 input"},
      {BugId::kL3, "L3", Stage::kLoader, "Concat negative axis off-by-one"},
      {BugId::kL4, "L4", Stage::kLoader,
       "Transpose permutation check accepts duplicates"},
      {BugId::kH1, "H1", Stage::kHighLevel,
       "ConstFold I8 saturates instead of wrapping"},
      {BugId::kH2, "H2", Stage::kHighLevel,
       "FuseElementwise fuses across multi-consumer intermediate"},
      {BugId::kH3, "H3", Stage::kHighLevel, "CSE ignores constant payload"},
      {BugId::kH4, "H4", Stage::kHighLevel,
       "LayoutTransform drops one boundary Transpose"},
      {BugId::kB1, "B1", Stage::kLowLevel, "UnrollExpand wrong remainder indices"},
      {BugId::kB2, "B2", Stage::kLowLevel, "TileLoops drops remainder loop"},
      {BugId::kB3, "B3", Stage::kLowLevel,
       "VectorizeLegalize skips dependence check"},
      {BugId::kB4, "B4", Stage::kLowLevel,
       "IntrinsicMap rewrites a*(b+c) as fma(a,b,c)"},
  }};
  return kCatalog;
}

std::string_view BugName(BugId id) {
  return SeededBugCatalog()[static_cast<size_t>(id)].name;
}

std::vector<BugId> BugSet::Enabled() const {
  std::vector<BugId> out;
  for (const auto& bug : SeededBugCatalog())
    if (Has(bug.id)) out.push_back(bug.id);
  return out;
}

std::string BugSet::ToString() const {
  std::string s;
  for (BugId id : Enabled()) {
    if (!s.empty()) s += ',';
    s += BugName(id);
  }
  return s;
}

BugSet BugSet::Parse(std::string_view list) {
  BugSet set;
  size_t start = 0;
  while (start <= list.size()) {
    size_t end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    std::string token(list.substr(start, end - start));
    token.erase(std::remove_if(token.begin(), token.end(),
                               [](unsigned char c) { return std::isspace(c); }),
                token.end());
    for (char& c : token) c = static_cast<char>(std::toupper(c));
    if (token == "ALL") {
      for (const auto& bug : SeededBugCatalog()) set = set.With(bug.id);
    } else if (!token.empty()) {
      bool found = false;
      for (const auto& bug : SeededBugCatalog()) {
        if (bug.name == token) {
          set = set.With(bug.id);
          found = true;
        }
      }
      if (!found) throw Error(ErrorKind::kConfigError, "unknown seeded bug '" + token + "'");
    }
    start = end + 1;
  }
  return set;
}

BugSet BugSet::FromEnvironment() {
  const char* env = std::getenv("STAGEFUZZ_BUGS");
  if (env == nullptr) return {};
  return Parse(env);
}

BugSet BugSet::ForStage(Stage stage) {
  BugSet set;
  for (const auto& bug : SeededBugCatalog())
    if (bug.stage == stage) set = set.With(bug.id);
  return set;
}

}  // namespace stagefuzz
