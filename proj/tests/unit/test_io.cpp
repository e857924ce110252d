#include <doctest.h>

#include "io.hpp"
#include "random.hpp"

#include <cmath>
#include <limits>
#include <sstream>

using namespace enz;
using namespace enz::io;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc{};
}

std::vector<std::vector<double>> parse(const std::string& text) {
  std::istringstream in(text);
  return read_numeric_table(in);
}

}  // namespace

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-7) == "-2.5e-07");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  Rng rng(71);
  for (int t = 0; t < 1000; ++t) {
    const double v = rng.normal() * std::pow(10.0, 40.0 * rng.uniform() - 20.0);
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("read_numeric_table handles headers, comments and separators") {
  const auto t = parse("a,b,c\n# comment\n1,2,3\n\n4 5\t6\n 7, 8 ,9 \n");
  REQUIRE(t.size() == 3);
  CHECK(t[0] == std::vector<double>{1, 2, 3});
  CHECK(t[1] == std::vector<double>{4, 5, 6});
  CHECK(t[2] == std::vector<double>{7, 8, 9});
  CHECK(parse("1e-3\n-inf\n")[1][0] == -std::numeric_limits<double>::infinity());
  CHECK(parse("").empty());
  CHECK(code_of([] { parse("1,2\n3,x\n"); }) == Errc::Parse);
  CHECK(code_of([] { read_numeric_table_file("/nonexistent/enz.csv"); }) == Errc::Io);
}

TEST_CASE("flatten and to_matrix") {
  const std::vector<std::vector<double>> t{{1, 2}, {3, 4}, {5, 6}};
  CHECK(flatten(t) == (Vector(6) << 1, 2, 3, 4, 5, 6).finished());
  const Matrix m = to_matrix(t);
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 2);
  CHECK(m(2, 0) == 5);
  CHECK(code_of([] { to_matrix({{1, 2}, {3}}); }) == Errc::Parse);
}
