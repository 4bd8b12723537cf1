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

#ifndef QOT_IO_HPP_
#define QOT_IO_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace qot {

inline constexpr int kFormatVersion = 1;

// Shortest round-trip rendering, independent of the global locale.
std::string FormatDouble(double value);
// Strict parse of a full field; throws ParseError.
double ParseDouble(std::string_view field);
std::vector<std::string_view> SplitCsvLine(std::string_view line);

// Writes `contents` to `path` through a temporary sibling and a rename, so a
// reader never observes a partially written file.
void WriteFileAtomic(const std::string& path, const std::string& contents);

}  // namespace qot

#endif  // QOT_IO_HPP_
