#pragma once

#include "desocial/types.hpp"

namespace desocial {

/// Anything that assigns a link probability to an ordered user pair. Trained
/// backbones implement it; tests plug in synthetic validators.
class PairScorer {
 public:
  virtual ~PairScorer() = default;
  virtual double score(UserId p, UserId q) const = 0;
};

}  // namespace desocial
