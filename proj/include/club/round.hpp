#pragma once

#include <vector>

#include "club/linalg.hpp"

namespace club {

/// One round as presented to a policy: the served user and the candidate
/// set. Feature-based environments fill `contexts`; environments with a
/// fixed item catalog also fill `item_ids` (same order). Featureless
/// replay rounds carry item ids only.
struct Round {
  int user = 0;
  std::vector<Vec> contexts;
  std::vector<int> item_ids;

  std::size_t size() const { return contexts.empty() ? item_ids.size() : contexts.size(); }
};

}  // namespace club
