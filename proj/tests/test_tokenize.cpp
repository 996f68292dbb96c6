// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "kvl/tokenize.hpp"

using namespace kvl;

TEST_CASE("tokenize lowercases and strips punctuation") {
  CHECK(tokenize("Why is the bride here?") ==
        std::vector<std::string>{"why", "is", "the", "bride", "here"});
}

TEST_CASE("tokenize of empty text is empty") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("  \t ...  ").empty());
}

TEST_CASE("tokenize collapses whitespace runs") {
  CHECK(tokenize("get   married") == std::vector<std::string>{"get", "married"});
}

TEST_CASE("tokenize splits on interior punctuation") {
  CHECK(tokenize("rock'n'roll, now!") ==
        std::vector<std::string>{"rock", "n", "roll", "now"});
  CHECK(tokenize("x-17 beta") == std::vector<std::string>{"x", "17", "beta"});
}
