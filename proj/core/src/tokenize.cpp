// SPDX-License-Identifier: Apache-2.0
#include "kvl/tokenize.hpp"

#include <cctype>

namespace kvl {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    // Bytes >= 0x80 are kept so multi-byte UTF-8 sequences stay intact.
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace kvl
