// Copyright 2026 The rm3d Authors
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

#include <string>
#include <string_view>
#include <vector>

namespace rm3d {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

/// Like format_double but always carries a decimal point ("-169.0", "2.25").
std::string format_decimal(double value);

std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

/// Strict parsers: the whole field must be consumed. Throw ParseError.
double parse_double(std::string_view field);
long long parse_int(std::string_view field);

}  // namespace rm3d
