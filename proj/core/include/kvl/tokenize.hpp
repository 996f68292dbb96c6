// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kvl {

/// Lowercase word tokenizer: alphanumeric runs (plus any non-ASCII bytes)
/// become tokens, everything else separates. Deterministic; empty input
/// yields an empty list.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace kvl
