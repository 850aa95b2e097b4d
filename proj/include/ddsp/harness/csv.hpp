// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Minimal RFC-4180 writer. Reals are printed with 17 significant digits.

#include "ddsp/io.hpp"

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace ddsp {

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  CsvWriter& field(std::string_view s) {
    sep();
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) {
      os_ << s;
    } else {
      os_ << '"';
      for (char c : s) {
        if (c == '"') os_ << '"';
        os_ << c;
      }
      os_ << '"';
    }
    return *this;
  }

  CsvWriter& field(double x) { return field(format_double(x)); }
  CsvWriter& field(Index x) { return field(std::to_string(x)); }
  CsvWriter& field(std::uint64_t x) { return field(std::to_string(x)); }
  CsvWriter& field(int x) { return field(std::to_string(x)); }
  CsvWriter& field(const char* s) { return field(std::string_view(s)); }
  CsvWriter& field(const std::string& s) { return field(std::string_view(s)); }

  CsvWriter& row(const std::vector<std::string>& cells) {
    for (const auto& c : cells) field(c);
    return end_row();
  }

  CsvWriter& end_row() {
    os_ << '\n';
    first_ = true;
    return *this;
  }

  void flush() { os_.flush(); }

 private:
  void sep() {
    if (!first_) os_ << ',';
    first_ = false;
  }

  std::ostream& os_;
  bool first_ = true;
};

}  // namespace ddsp
