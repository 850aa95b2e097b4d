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

// Text dump of a matrix stack:
//
//   # ddsp-stack slices=K rows=R cols=C
//   re,im
//   re,im
//   ...
//
// one line per entry in row-major (slice, row, col) order, values printed
// with 17 significant digits so that a dump re-reads bit-exactly.

#include "ddsp/core.hpp"
#include "ddsp/types.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace ddsp {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

inline void write_stack(std::ostream& os, const MatrixStack& s) {
  os << "# ddsp-stack slices=" << s.size() << " rows=" << s.rows() << " cols=" << s.cols() << '\n';
  for (Index k = 0; k < s.size(); ++k) {
    for (Index r = 0; r < s.rows(); ++r) {
      for (Index c = 0; c < s.cols(); ++c) {
        os << format_double(s[k](r, c).real()) << ',' << format_double(s[k](r, c).imag()) << '\n';
      }
    }
  }
}

inline MatrixStack read_stack(std::istream& is) {
  std::string header;
  require(static_cast<bool>(std::getline(is, header)), "io", "missing stack header");
  Index slices = -1;
  Index rows = -1;
  Index cols = -1;
  const int got = std::sscanf(header.c_str(), "# ddsp-stack slices=%td rows=%td cols=%td", &slices,
                              &rows, &cols);
  require(got == 3 && slices >= 0 && rows >= 0 && cols >= 0, "io",
          "malformed stack header '" + header + "'");
  MatrixStack s(slices, rows, cols);
  std::string line;
  for (Index k = 0; k < slices; ++k) {
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        require(static_cast<bool>(std::getline(is, line)), "io", "truncated stack dump");
        const auto comma = line.find(',');
        require(comma != std::string::npos, "io", "expected 're,im' but got '" + line + "'");
        s[k](r, c) = cd(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
      }
    }
  }
  return s;
}

inline void save_channel(const std::string& path, const FreqChannel& h) {
  std::ofstream os(path);
  require(static_cast<bool>(os), "io", "cannot open '" + path + "' for writing");
  write_stack(os, h.data);
}

inline FreqChannel load_channel(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), "io", "cannot open '" + path + "'");
  return FreqChannel(read_stack(is));
}

}  // namespace ddsp
