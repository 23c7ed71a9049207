#include "mswf/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mswf/errors.hpp"

namespace mswf {
namespace {

static_assert(std::endian::native == std::endian::little, "WFGF io assumes a little-endian host");

constexpr char kMagic[4] = {'W', 'F', 'G', 'F'};
constexpr std::uint16_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& where) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<std::size_t>(is.gcount()) == sizeof(T), ErrorCode::Input,
          "truncated WFGF file " + where);
  return v;
}

}  // namespace

void write_wfgf(const std::filesystem::path& path, const GridFunction& f) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::Input, "cannot open " + path.string() + " for writing");
  const GridSpec& g = f.grid();
  os.write(kMagic, 4);
  put<std::uint16_t>(os, kVersion);
  put<std::uint16_t>(os, static_cast<std::uint16_t>(g.dimension()));
  for (int d = 0; d < g.dimension(); ++d) {
    put<std::uint64_t>(os, g.points(d));
    put<double>(os, g.half_width(d));
  }
  for (const cplx& z : f.values()) {
    put<double>(os, z.real());
    put<double>(os, z.imag());
  }
  require(static_cast<bool>(os), ErrorCode::Input, "failed writing " + path.string());
}

GridFunction read_wfgf(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::Input, "cannot open " + path.string());
  const std::string where = path.string();
  char magic[4];
  is.read(magic, 4);
  require(is.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0, ErrorCode::Input,
          where + " is not a WFGF file");
  const auto version = get<std::uint16_t>(is, where);
  require(version == kVersion, ErrorCode::Input,
          "unsupported WFGF version " + std::to_string(version));
  const auto n = get<std::uint16_t>(is, where);
  require(n >= 1 && n <= 3, ErrorCode::Input, "WFGF dimension must be 1, 2 or 3");
  std::vector<std::size_t> points;
  std::vector<double> widths;
  for (int d = 0; d < n; ++d) {
    points.push_back(get<std::uint64_t>(is, where));
    widths.push_back(get<double>(is, where));
  }
  GridFunction f(GridSpec(points, widths));
  for (cplx& z : f.values()) {
    const double re = get<double>(is, where);
    const double im = get<double>(is, where);
    z = {re, im};
  }
  is.peek();
  require(is.eof(), ErrorCode::Input, where + " has trailing bytes");
  return f;
}

std::string grid_csv(const GridFunction& f) {
  const GridSpec& g = f.grid();
  const int n = g.dimension();
  std::ostringstream os;
  os << std::setprecision(17);
  for (int d = 0; d < n; ++d) os << "index" << d << ",";
  for (int d = 0; d < n; ++d) os << "x" << d << ",";
  os << "re,im\n";
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < f.size(); ++i) {
    g.unflatten(i, idx);
    for (int d = 0; d < n; ++d) os << idx[d] << ",";
    for (int d = 0; d < n; ++d) os << g.coordinate(d, idx[d]) << ",";
    os << f[i].real() << "," << f[i].imag() << "\n";
  }
  return os.str();
}

std::string trajectory_csv(const VectorPotentialModel& model, const FlowResult& r) {
  const int n = r.dimension();
  std::ostringstream os;
  os << std::setprecision(17) << "s,";
  for (int d = 0; d < n; ++d) os << "x" << d << ",";
  for (int d = 0; d < n; ++d) os << "xi" << d << ",";
  os << "h,RePsi,ImPsi,RePhase,ImPhase\n";
  for (const FlowState& st : r.trajectory) {
    const cplx p = psi(model, st.s, st.x, st.xi);
    const cplx acc = r.phase_at(st.s);
    os << st.s << ",";
    for (int d = 0; d < n; ++d) os << st.x(d) << ",";
    for (int d = 0; d < n; ++d) os << st.xi(d) << ",";
    os << hamiltonian(model, st.s, st.x, st.xi) << "," << p.real() << "," << p.imag() << ","
       << acc.real() << "," << acc.imag() << "\n";
  }
  return os.str();
}

std::string probe_csv(const std::vector<std::pair<double, double>>& probe) {
  std::ostringstream os;
  os << std::setprecision(17) << "t,l2\n";
  for (const auto& [t, l2] : probe) os << t << "," << l2 << "\n";
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::Input, "cannot open " + path.string() + " for writing");
  os << text;
  require(static_cast<bool>(os), ErrorCode::Input, "failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::Input, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace mswf
