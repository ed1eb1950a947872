#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "routesig/moments.hpp"
#include "test_support.hpp"

using namespace routesig;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/routesig_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("export carries the moment-matrix dimension") {
  RoutingScenario sc = test::two_link_affine();
  MomentProgram prog = build_diagonal_sdp(sc, 1.0);
  SdpaFile file = sdpa_encode(prog);

  REQUIRE(file.block_sizes.size() == 2);
  CHECK(file.block_sizes[0] == 7);  // (s+1) n + 1
  CHECK(file.block_sizes[1] < 0);   // scalar rows live in a diagonal block
  CHECK(file.c.size() == 7 * 8 / 2);
}

TEST_CASE("export, import and re-export round-trip byte for byte") {
  RoutingScenario sc = test::two_link_affine();
  MomentProgram prog = build_diagonal_sdp(sc, 0.5);
  TempFile f1("roundtrip1.dat-s"), f2("roundtrip2.dat-s");
  export_sdpa(prog, f1.path);
  SdpaFile parsed = read_sdpa(f1.path);
  write_sdpa(parsed, f2.path);
  CHECK(slurp(f1.path) == slurp(f2.path));
  CHECK(!slurp(f1.path).empty());
}

TEST_CASE("the exported program solves to the same value") {
  RoutingScenario sc = test::two_link_affine();
  MomentProgram prog = build_diagonal_sdp(sc, 1.0);
  auto direct = solve_moment_sdp(prog);
  REQUIRE(direct.status == SdpStatus::Optimal);

  TempFile f("companion.dat-s");
  export_sdpa(prog, f.path);
  double via_file = solve_sdpa_file(read_sdpa(f.path));
  CHECK(std::abs(via_file - direct.value) <= 1e-5 * (1.0 + std::abs(direct.value)));
}

TEST_CASE("a third-party conic solver reproduces the exported value") {
  if (std::system("python3 -c 'import cvxopt' > /dev/null 2>&1") != 0) {
    MESSAGE("cvxopt not available; cross-check skipped");
    return;
  }
  RoutingScenario sc = test::two_link_affine();
  MomentProgram prog = build_diagonal_sdp(sc, 1.0);
  auto direct = solve_moment_sdp(prog);
  REQUIRE(direct.status == SdpStatus::Optimal);

  TempFile f("cross.dat-s");
  export_sdpa(prog, f.path);
  const std::string script = std::string(ROUTESIG_SCENARIO_DIR) +
                             "/../tests/cross_check_sdpa.py";
  const std::string out = "/tmp/routesig_cross_out.txt";
  int rc = std::system(("python3 " + script + " " + f.path + " > " + out).c_str());
  REQUIRE(rc == 0);
  std::string text = slurp(out);
  auto at = text.find("value:");
  REQUIRE(at != std::string::npos);
  double value = std::stod(text.substr(at + 6));
  CHECK(std::abs(value - direct.value) <= 1e-5 * (1.0 + std::abs(direct.value)));
  std::remove(out.c_str());
}

TEST_CASE("entries are one-based upper-triangular and sorted") {
  RoutingScenario sc = test::two_link_affine();
  SdpaFile file = sdpa_encode(build_diagonal_sdp(sc, 0.25));
  for (size_t t = 0; t < file.entries.size(); ++t) {
    const auto& e = file.entries[t];
    CHECK(e.i >= 1);
    CHECK(e.j >= e.i);
    CHECK(e.blkno >= 1);
    CHECK(e.value != 0.0);
    if (t > 0) {
      const auto& p = file.entries[t - 1];
      CHECK(std::tie(p.matno, p.blkno, p.i, p.j) <= std::tie(e.matno, e.blkno, e.i, e.j));
    }
  }
}
