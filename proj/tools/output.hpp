#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "transonic/error.hpp"

namespace transonic::cli {

/// Shortest text that reads back to the same double.
inline std::string num(double v) {
  char buf[32];
  for (int p = 15; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// FNV-1a, used for run ids.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  require(bool(f), ErrorKind::validation, "cannot write " + p.string());
  return f;
}

/// Comma-separated table with a header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& p, const std::vector<std::string>& header) : f_(open_out(p)) {
    for (std::size_t k = 0; k < header.size(); ++k) f_ << (k ? "," : "") << header[k];
    f_ << '\n';
  }
  void row(const std::vector<double>& v) {
    for (std::size_t k = 0; k < v.size(); ++k) f_ << (k ? "," : "") << num(v[k]);
    f_ << '\n';
  }

 private:
  std::ofstream f_;
};

/// Reads a CSV written by CsvWriter into a header and rows.
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(const std::filesystem::path& p) {
  std::ifstream f(p);
  require(bool(f), ErrorKind::validation, "cannot read " + p.string());
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  if (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  while (std::getline(f, line)) {
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::strtod(cell.c_str(), nullptr));
    rows.push_back(std::move(r));
  }
  return {header, rows};
}

/// Legacy VTK structured points, x = x2, y = x3, z = x1. Fields are cross nodes x axial slices.
class VtkWriter {
 public:
  VtkWriter(const std::filesystem::path& p, std::size_t n2, std::size_t n3, std::size_t n1,
            std::array<double, 3> origin, std::array<double, 3> spacing)
      : f_(open_out(p)), points_(n2 * n3 * n1) {
    f_ << "# vtk DataFile Version 3.0\ntransonic duct field\nASCII\nDATASET STRUCTURED_POINTS\n";
    f_ << "DIMENSIONS " << n2 << ' ' << n3 << ' ' << n1 << '\n';
    f_ << "ORIGIN " << num(origin[0]) << ' ' << num(origin[1]) << ' ' << num(origin[2]) << '\n';
    f_ << "SPACING " << num(spacing[0]) << ' ' << num(spacing[1]) << ' ' << num(spacing[2]) << '\n';
    f_ << "POINT_DATA " << points_ << '\n';
  }
  void scalars(const std::string& name, const Eigen::MatrixXd& f) {
    f_ << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (long i = 0; i < f.cols(); ++i)
      for (long c = 0; c < f.rows(); ++c) f_ << num(f(c, i)) << '\n';
  }
  void vectors(const std::string& name, const std::array<Eigen::MatrixXd, 3>& v) {
    f_ << "VECTORS " << name << " double\n";
    // VTK order (x2, x3, x1).
    for (long i = 0; i < v[0].cols(); ++i)
      for (long c = 0; c < v[0].rows(); ++c) f_ << num(v[1](c, i)) << ' ' << num(v[2](c, i)) << ' ' << num(v[0](c, i)) << '\n';
  }

 private:
  std::ofstream f_;
  std::size_t points_;
};

}  // namespace transonic::cli
