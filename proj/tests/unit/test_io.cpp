#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mswf/characteristics.hpp"
#include "mswf/errors.hpp"
#include "mswf/io.hpp"
#include "mswf/packets.hpp"

using namespace mswf;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "mswf_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("wfgf round trip is bit exact") {
  const GridSpec g({8, 16}, {3.0, 2.5});
  GridFunction f = gaussian(g, 0.7);
  f[3] = cplx(-1.25e-300, 7.0);
  const auto p = scratch("f.wfgf");
  write_wfgf(p, f);
  CHECK(std::filesystem::file_size(p) == 4 + 2 + 2 + 2 * 16 + 128 * 16);
  const GridFunction h = read_wfgf(p);
  CHECK(h.grid() == g);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(h[i] == f[i]);
}

TEST_CASE("wfgf header layout") {
  const GridSpec g(1, 8, 2.0);
  const auto p = scratch("h.wfgf");
  write_wfgf(p, GridFunction(g));
  std::ifstream is(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(is)), {});
  CHECK(bytes.substr(0, 4) == "WFGF");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(bytes[5] == 0);
  CHECK(static_cast<unsigned char>(bytes[6]) == 1);
  CHECK(static_cast<unsigned char>(bytes[8]) == 8);
}

TEST_CASE("wfgf rejects corrupt files") {
  const auto p = scratch("bad.wfgf");
  {
    std::ofstream os(p, std::ios::binary);
    os << "WFGX";
  }
  CHECK_THROWS_AS(read_wfgf(p), Error);
  write_wfgf(p, GridFunction(GridSpec(1, 8, 1.0)));
  std::filesystem::resize_file(p, std::filesystem::file_size(p) - 3);
  CHECK_THROWS_AS(read_wfgf(p), Error);
  CHECK_THROWS_AS(read_wfgf(scratch("missing.wfgf")), Error);
}

TEST_CASE("grid csv columns") {
  const GridSpec g({8, 8}, {4.0, 4.0});
  GridFunction f(g);
  f[1] = cplx(0.5, -2.0);
  const std::string csv = grid_csv(f);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "index0,index1,x0,x1,re,im");
  std::getline(is, line);
  std::getline(is, line);
  CHECK(line == "0,1,-4,-3,0.5,-2");
}

TEST_CASE("trajectory csv carries h and Psi per step") {
  const auto model = VectorPotentialModel::zero(1);
  const FlowResult r = flow(model, 0.0, 1.0, Vec::Constant(1, 0.0), Vec::Constant(1, 2.0), 1e-10);
  const std::string csv = trajectory_csv(model, r);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "s,x0,xi0,h,RePsi,ImPsi,RePhase,ImPhase");
  std::getline(is, line);
  CHECK(line == "0,0,2,2,-2,0,0,0");
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == static_cast<int>(r.trajectory.size()));
}
