#include "doctest.h"
#include "helpers.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "degpop/io.hpp"

using namespace degpop;
using namespace testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("degpop_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::vector<std::string> out;
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::string bytes_of(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("1 x 1 x 2 field writes three lines") {
  const fs::path dir = scratch_dir("tiny");
  const std::vector<double> t{0.0}, a{0.5}, x{0.25, 0.75}, v{0.5, -0.5};
  io::write_field_csv(t, a, x, v, dir / "f.csv");
  const auto lines = lines_of(dir / "f.csv");
  REQUIRE(lines.size() == 3u);
  CHECK(lines[0] == "t,a,x,value");
  CHECK(lines[1] == "0,0.5,0.25,0.5");
  CHECK(lines[2] == "0,0.5,0.75,-0.5");
  CHECK(bytes_of(dir / "f.csv").find('\r') == std::string::npos);
  CHECK_THROWS_AS(io::write_field_csv(t, a, x, std::vector<double>{1.0}, dir / "g.csv"), ShapeError);
}

TEST_CASE("headers follow the rank") {
  const fs::path dir = scratch_dir("headers");
  const Grid g = coarse_grid();
  io::export_field_csv(Field::profile(g, [](double x) { return x; }), dir / "p.csv");
  io::export_field_csv(Field(g, Rank::Slice), dir / "s.csv");
  io::export_field_csv(Field(g, Rank::Trajectory), dir / "t.csv");
  CHECK(lines_of(dir / "p.csv").front() == "x,value");
  CHECK(lines_of(dir / "p.csv").size() == static_cast<std::size_t>(g.space_nodes()) + 1);
  CHECK(lines_of(dir / "s.csv").front() == "a,x,value");
  CHECK(lines_of(dir / "t.csv").front() == "t,a,x,value");
  CHECK(lines_of(dir / "t.csv").size() == g.trajectory_size() + 1);
}

TEST_CASE("round trip is bit exact") {
  const fs::path dir = scratch_dir("roundtrip");
  const Grid g = coarse_grid();
  for (Rank r : {Rank::Profile, Rank::Slice, Rank::Trajectory}) {
    Field f = random_field(g, r, 17);
    f.values()[0] = 1e-300;
    f.values()[1] = -123456789.123456789;
    f.values()[2] = 1.0 / 3.0;
    io::export_field_csv(f, dir / "f.csv");
    const Field back = io::import_field_csv(dir / "f.csv", g);
    CHECK(back.rank() == r);
    CHECK(bit_equal(back, f));
  }
}

TEST_CASE("import checks the grid and the file") {
  const fs::path dir = scratch_dir("import");
  const Grid g = coarse_grid();
  io::export_field_csv(random_field(g, Rank::Slice, 1), dir / "f.csv");
  CHECK_THROWS_AS(io::import_field_csv(dir / "f.csv", Grid::build(1.0, 2.0, 16, 40, 0.3)), ShapeError);
  CHECK_THROWS_AS(io::import_field_csv(dir / "missing.csv", g), IoError);
  io::write_text(dir / "bad.csv", "a,x,value\n0.03125,0,abc\n");
  CHECK_THROWS_AS(io::import_field_csv(dir / "bad.csv", g), IoError);
}

TEST_CASE("double formatting") {
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(-2.0) == "-2");
  CHECK(std::stod(io::format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("report table") {
  const fs::path dir = scratch_dir("reports");
  CertificateReport r;
  r.lhs = 2.0;
  r.rhs = 4.0;
  r.note = "has, comma";
  finalize(r);
  io::export_reports_csv({r}, dir / "r.csv");
  const auto lines = lines_of(dir / "r.csv");
  REQUIRE(lines.size() == 2u);
  CHECK(lines[0] == "inequality,s,delta,sample_id,seed,lhs,rhs,ratio,log_scale,anomaly,region,grid,note");
  CHECK(lines[1].find("\"has, comma\"") != std::string::npos);
  CHECK(lines[1].find(",0.5,") != std::string::npos);
}
