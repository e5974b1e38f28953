#include "desocial/types.hpp"

#include <algorithm>
#include <cctype>

namespace desocial {

std::string_view to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::MLP: return "MLP";
    case BackboneKind::GCN: return "GCN";
    case BackboneKind::GAT: return "GAT";
    case BackboneKind::SAGE: return "SAGE";
    case BackboneKind::SGC: return "SGC";
  }
  return "?";
}

std::optional<BackboneKind> parse_backbone(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "GRAPHSAGE") upper = "SAGE";
  for (auto kind : kAllBackbones) {
    if (to_string(kind) == upper) return kind;
  }
  return std::nullopt;
}

bool pool_contains(const BackbonePool& pool, BackboneKind kind) {
  return std::find(pool.begin(), pool.end(), kind) != pool.end();
}

std::string pool_to_string(const BackbonePool& pool) {
  std::string out;
  for (auto kind : pool) {
    if (!out.empty()) out += '+';
    out += to_string(kind);
  }
  return out;
}

BackbonePool parse_pool(std::string_view text) {
  BackbonePool pool;
  std::size_t i = 0;
  while (i <= text.size()) {
    std::size_t j = text.find_first_of(",+ ", i);
    if (j == std::string_view::npos) j = text.size();
    auto token = text.substr(i, j - i);
    if (!token.empty()) {
      auto kind = parse_backbone(token);
      if (!kind) throw Error("unknown backbone '" + std::string(token) + "'");
      if (pool_contains(pool, *kind)) throw Error("duplicate backbone '" + std::string(token) + "'");
      pool.push_back(*kind);
    }
    i = j + 1;
  }
  if (pool.empty()) throw Error("backbone pool must be non-empty");
  return pool;
}

}  // namespace desocial
