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

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <set>
#include <sstream>

using namespace ddsp;
using Catch::Matchers::WithinAbs;

TEST_CASE("Philox4x32-10 reproduces the Random123 known-answer vectors", "[rng]") {
  using B = Philox4x32::Block;
  CHECK(Philox4x32::generate(B{0, 0, 0, 0}, {0, 0}) ==
        B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::generate(B{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                             {0xffffffffu, 0xffffffffu}) ==
        B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::generate(B{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                             {0xa4093822u, 0x299f31d0u}) ==
        B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("Rng streams are reproducible and independent", "[rng]") {
  Rng a(42, Stream::channel);
  Rng b(42, Stream::channel);
  Rng c(42, Stream::srs_noise);
  Rng d(43, Stream::channel);
  std::vector<std::uint64_t> va, vb, vc, vd;
  for (int i = 0; i < 64; ++i) {
    va.push_back(a.next_u64());
    vb.push_back(b.next_u64());
    vc.push_back(c.next_u64());
    vd.push_back(d.next_u64());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
}

TEST_CASE("Rng uniform and complex normal moments", "[rng]") {
  Rng rng(7, Stream::test);
  constexpr int n = 200000;
  double sum = 0.0;
  double lo = 1.0;
  double hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    sum += u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK_THAT(sum / n, WithinAbs(0.5, 0.005));

  cd mean = 0.0;
  double power = 0.0;
  cd pseudo = 0.0;
  for (int i = 0; i < n; ++i) {
    const cd z = rng.complex_normal(2.5);
    mean += z;
    power += std::norm(z);
    pseudo += z * z;
  }
  CHECK(std::abs(mean / double(n)) < 0.02);
  CHECK_THAT(power / n, WithinAbs(2.5, 2.5 * 0.02));
  CHECK(std::abs(pseudo / double(n)) < 0.05);  // circular symmetry
}

TEST_CASE("unitary DFT convention", "[dft]") {
  const CMat f = unitary_dft(16);
  CHECK(unitarity_defect(f) < 1e-12);
  for (Index k = 0; k < 16; ++k) {
    for (Index d = 0; d < 16; ++d) {
      CHECK(std::abs(f(k, d) - oracle::dft(k, d, 16)) < 1e-14);
    }
  }
  const Twiddles tw(12);
  CHECK(std::abs(tw.plus(-1) - std::conj(tw.plus(1))) < 1e-15);
  CHECK(std::abs(tw.plus(25) - tw.plus(1)) == 0.0);
  CHECK(std::abs(dft_entry(3, 5, 12) - oracle::dft(3, 5, 12)) < 1e-15);
}

TEST_CASE("partial DFT rows match the full matrix", "[dft]") {
  const CMat f = partial_dft(32, 6);
  const std::vector<Index> rows{0, 5, 31, 17};
  const CMat sub = partial_dft_rows(32, 6, rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK((sub.row(static_cast<Index>(i)) - f.row(rows[i])).norm() < 1e-15);
  }
  CHECK_THROWS_AS(partial_dft(8, 9), DimensionError);
}

TEST_CASE("MatrixStack flatten round trip and shape checks", "[core]") {
  std::mt19937_64 gen(1);
  MatrixStack s(5, 3, 2);
  for (auto& m : s) m = oracle::random_matrix(3, 2, gen);
  const CMat flat = s.flatten();
  CHECK(flat.rows() == 5);
  CHECK(flat.cols() == 6);
  CHECK(flat(2, 4) == s[2](1, 1));  // column-major within a slice
  const auto back = MatrixStack::unflatten(flat, 3, 2);
  CHECK(squared_distance(back, s) == 0.0);
  CHECK_THROWS_AS(MatrixStack::unflatten(flat, 2, 2), DimensionError);
  CHECK_THROWS_AS(MatrixStack(std::vector<CMat>{CMat(2, 2), CMat(3, 2)}), DimensionError);
}

TEST_CASE("canonicalize_column_phases makes the first nonzero entry real positive", "[core]") {
  CMat m(3, 2);
  m << cd(0, 0), cd(0, 2), cd(0, -1), cd(1, 1), cd(3, 0), cd(0, 0);
  const CMat before = m;
  canonicalize_column_phases(m);
  CHECK(std::abs(m(1, 0) - cd(1, 0)) < 1e-15);
  CHECK(std::abs(m(0, 1) - cd(2, 0)) < 1e-15);
  for (Index j = 0; j < 2; ++j) CHECK(std::abs(m.col(j).norm() - before.col(j).norm()) < 1e-15);
}

TEST_CASE("errors carry stage labels", "[core]") {
  try {
    require(false, "pilot", "A must divide K");
    FAIL("no throw");
  } catch (const ConfigError& e) {
    CHECK(e.stage() == "pilot");
    CHECK(std::string(e.what()) == "pilot: A must divide K");
  }
}

TEST_CASE("stack dump re-reads bit-exactly", "[io]") {
  std::mt19937_64 gen(3);
  const auto h = oracle::random_freq_channel(4, 2, 3, gen);
  std::stringstream ss;
  write_stack(ss, h.data);
  const std::string text = ss.str();
  CHECK(text.rfind("# ddsp-stack slices=4 rows=2 cols=3\n", 0) == 0);
  // second line is slice 0, row 0, col 0; third is row 0, col 1
  std::istringstream lines(text);
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(first == format_double(h[0](0, 0).real()) + "," + format_double(h[0](0, 0).imag()));
  CHECK(second == format_double(h[0](0, 1).real()) + "," + format_double(h[0](0, 1).imag()));
  const auto back = read_stack(ss);
  CHECK(squared_distance(back, h.data) == 0.0);

  std::istringstream bad("# ddsp-stack slices=1 rows=1 cols=1\n1.0;2.0\n");
  CHECK_THROWS_AS(read_stack(bad), ConfigError);
}
