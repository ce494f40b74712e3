#pragma once

// Small output helpers: atomic file writes, content hashing, PGM label images
// and a minimal SVG line chart.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nlab/domains.hpp"
#include "nlab/error.hpp"

namespace nlab::io {

/// Writes to `path.tmp` and renames over `path`.
inline void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

/// Binary PGM of a nodal labeling: exterior black, nodal set mid-gray,
/// positive domains in light shades, negative in dark shades. Row 0 of the
/// image is the top of the grid.
inline std::string label_pgm(const GridDomain& d, const std::vector<int>& labels,
                             const std::vector<int>& signs) {
  std::ostringstream os;
  os << "P5\n" << d.nx() << ' ' << d.ny() << "\n255\n";
  for (int j = d.ny() - 1; j >= 0; --j) {
    for (int i = 0; i < d.nx(); ++i) {
      const int k = d.lookup(i, j);
      unsigned char px = 0;
      if (k != GridDomain::kOutside) {
        const int id = labels[k];
        if (id == 0)
          px = 128;
        else if (signs[id - 1] > 0)
          px = static_cast<unsigned char>(170 + (id * 37) % 86);
        else
          px = static_cast<unsigned char>(20 + (id * 37) % 86);
      }
      os.put(static_cast<char>(px));
    }
  }
  return os.str();
}

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
};

/// Line chart with axes and a horizontal reference line (skipped if NaN).
inline std::string svg_line_chart(const std::string& title, const std::string& xlabel,
                                  const std::string& ylabel, const std::vector<Series>& series,
                                  double reference = std::nan("")) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!std::isnan(reference)) {
    ymin = std::min(ymin, reference);
    ymax = std::max(ymax, reference);
  }
  if (!(xmax > xmin)) xmax = xmin + 1;
  if (!(ymax > ymin)) ymax = ymin + 1;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
     << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
     << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
  os << "<text x=\"" << L << "\" y=\"" << H - B + 16 << "\" font-size=\"11\">" << xmin << "</text>\n";
  os << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" font-size=\"11\" text-anchor=\"end\">"
     << xmax << "</text>\n";
  os << "<text x=\"" << L - 4 << "\" y=\"" << H - B << "\" font-size=\"11\" text-anchor=\"end\">"
     << ymin << "</text>\n";
  os << "<text x=\"" << L - 4 << "\" y=\"" << T + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
     << ymax << "</text>\n";
  if (!std::isnan(reference))
    os << "<line x1=\"" << L << "\" y1=\"" << py(reference) << "\" x2=\"" << W - R << "\" y2=\""
       << py(reference) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace nlab::io
