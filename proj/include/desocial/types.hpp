#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace desocial {

using UserId = std::uint32_t;
using Period = int;

/// Raised for contract violations and malformed inputs across the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BackboneKind : std::uint8_t { MLP = 0, GCN = 1, GAT = 2, SAGE = 3, SGC = 4 };

/// Canonical order; also the tie-break order for personalized selection.
inline constexpr std::array<BackboneKind, 5> kAllBackbones = {
    BackboneKind::MLP, BackboneKind::GCN, BackboneKind::GAT, BackboneKind::SAGE,
    BackboneKind::SGC};

std::string_view to_string(BackboneKind kind);
std::optional<BackboneKind> parse_backbone(std::string_view text);

/// Ordered, non-empty, duplicate-free subset of the backbone pool.
using BackbonePool = std::vector<BackboneKind>;

bool pool_contains(const BackbonePool& pool, BackboneKind kind);
std::string pool_to_string(const BackbonePool& pool);
BackbonePool parse_pool(std::string_view text);

}  // namespace desocial
