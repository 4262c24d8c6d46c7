#pragma once

#include <string>
#include <string_view>

#include "robust_merton/market_model.hpp"

namespace robust_merton {

/// Parses a JSON market spec (schema in docs/spec_format.md).
///
/// Syntax errors and malformed fields raise ParseError with the line/column
/// or the field path; broken model invariants raise ValidationError.
MarketSpec parse_market_spec(std::string_view text);
MarketSpec load_market_spec(const std::string& path);

/// Serializes a spec in the same schema (bounds included).
std::string market_spec_to_json(const MarketSpec& spec);

}  // namespace robust_merton
