#pragma once

#include <cstddef>
#include <vector>

#include "desocial/graph_store.hpp"

namespace desocial {

/// One test connection and its sampled alternatives. The first K-1 entries of
/// `negatives` form the negative set for Acc@K, so sets for smaller K are
/// prefixes of those for larger K.
struct EvalQuery {
  EdgePair positive;
  std::vector<UserId> negatives;
  Period period = 0;
  /// Position in the period's query list.
  std::size_t index = 0;
};

}  // namespace desocial
