// Copyright 2026 The qotstat Authors.
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

#ifndef QOT_TOOLS_CLI_HPP_
#define QOT_TOOLS_CLI_HPP_

#include <ostream>

namespace qot::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitAssertionFailed = 3;

/// Parses and runs one subcommand (solve, ci, clt-sim, diagnose, sample).
/// Messages go to `err`; outputs are files under --out.
int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qot::cli

#endif  // QOT_TOOLS_CLI_HPP_
