// Copyright (c) 2026 The dfmamba Authors. All Rights Reserved.
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

#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dfm {

// Raised when a caller breaks an operation's precondition (shape mismatch,
// indivisible extents, nonpositive timescale, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed or truncated on-disk data. `offset` is the byte position where
// decoding failed, or -1 when the problem is not tied to a position.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::int64_t offset = -1)
      : std::runtime_error(offset >= 0 ? what + " (at byte offset " +
                                             std::to_string(offset) + ")"
                                       : what),
        offset_(offset) {}
  std::int64_t offset() const { return offset_; }

 private:
  std::int64_t offset_;
};

// Non-finite values showed up where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested mode is not supported by an operation (e.g. kernel form of a
// selective scan).
class UnsupportedMode : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

template <typename... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace detail

}  // namespace dfm

#define DFM_CHECK(cond, ...)                                          \
  do {                                                                \
    if (!(cond)) {                                                    \
      throw ::dfm::ContractViolation(::dfm::detail::concat(__VA_ARGS__)); \
    }                                                                 \
  } while (0)
