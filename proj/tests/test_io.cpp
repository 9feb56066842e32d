#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "pqlab/functionals.hpp"
#include "pqlab/io.hpp"

using namespace pqlab;
using nlohmann::json;

TEST(Hash, FnvReferenceVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Hash, ConfigHashIgnoresKeyOrder) {
  const auto a = json::parse(R"({"p": 3, "q": 1.5, "seed": 2})");
  const auto b = json::parse(R"({"seed": 2, "q": 1.5, "p": 3})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(json::parse(R"({"p": 3, "q": 1.5, "seed": 3})")));
  EXPECT_EQ(config_hash(a).size(), 16u);
  const auto m = run_metadata(a);
  EXPECT_EQ(m["seed"], 2);
  EXPECT_TRUE(m.contains("tolerances"));
  EXPECT_EQ(m["versions"]["pqlab"], version);
}

TEST(GridFunctionCsv, RoundTrip1D) {
  const auto mesh = Mesh::build(Domain::interval(2.0), 100);
  std::mt19937_64 rng(1);
  const auto u = random_test_function(mesh, rng, 3.0);
  std::stringstream ss;
  write_grid_function(ss, u, {{"seed", 1}});
  std::string first;
  std::getline(ss, first);
  ASSERT_EQ(first.rfind("# ", 0), 0u);
  const auto head = json::parse(first.substr(2));
  EXPECT_EQ(head["nodes"], 100);
  EXPECT_EQ(head["seed"], 1);
  ss.seekg(0);
  const auto v = read_grid_function(ss, mesh);
  EXPECT_EQ(u.values, v.values);
}

TEST(GridFunctionCsv, RoundTrip2DAndErrors) {
  const int n = 9;
  std::vector<std::uint8_t> mask(n * n, 1);
  mask[4 * n + 4] = 0;
  const auto mesh = Mesh::build(Domain::pixel(n, n, 0.125, 0, 0, mask, "holed"));
  const auto u = GridFunction::from(mesh, [](double x, double y) { return x * (1 - x) * y * (1 - y); });
  std::stringstream ss;
  write_grid_function(ss, u);
  EXPECT_EQ(read_grid_function(ss, mesh).values, u.values);
  std::stringstream short_in("# {}\nx,y,u\n0.1,0.1,1\n");
  EXPECT_THROW(read_grid_function(short_in, mesh), invalid_input);
}

TEST(Pgm, HeaderAndPixels) {
  const int n = 6;
  const auto mesh = Mesh::build(Domain::pixel(n, 4, 0.2, 0, 0, std::vector<std::uint8_t>(n * 4, 1)));
  std::ostringstream os;
  write_pgm(os, *mesh);
  const std::string s = os.str();
  ASSERT_EQ(s.rfind("P5\n6 4\n255\n", 0), 0u);
  const std::string px = s.substr(std::string("P5\n6 4\n255\n").size());
  ASSERT_EQ(px.size(), 24u);
  // outer ring inactive (black), interior white
  EXPECT_EQ(static_cast<unsigned char>(px[0]), 0);
  EXPECT_EQ(static_cast<unsigned char>(px[n + 1]), 255);
  EXPECT_THROW(write_pgm(os, *Mesh::build(Domain::interval(1.0), 10)), invalid_input);
}
