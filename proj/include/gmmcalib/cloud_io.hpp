#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gmmcalib/point_cloud.hpp"

namespace gmmcalib {

enum class CloudFormat { PlyAscii, PcdAscii, XyzCsv };

/// Format from the file extension (.ply, .pcd, .csv/.xyz).
inline CloudFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".ply") return CloudFormat::PlyAscii;
  if (ext == ".pcd") return CloudFormat::PcdAscii;
  if (ext == ".csv" || ext == ".xyz") return CloudFormat::XyzCsv;
  throw Error(ErrorKind::UnsupportedFormat, "unrecognized point cloud extension '" + ext + "'");
}

/// Nine significant digits, the text precision used by every writer here.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// Writes via a temporary sibling file and renames it into place.
inline void write_text_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot rename into '" + path.string() + "': " + ec.message());
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline double parse_number(const std::string& tok, std::size_t line_no, const std::string& path) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::ParseError,
                path + ":" + std::to_string(line_no) + ": invalid coordinate token '" + tok + "'");
  }
  return v;
}

[[noreturn]] inline void parse_fail(const std::string& path, std::size_t line_no, const std::string& what) {
  throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": " + what);
}

// Applies "sensor_id <v>" / "frame_label <v>" metadata found in comments.
inline void apply_metadata(const std::vector<std::string>& tokens, PointCloud& cloud) {
  if (tokens.size() >= 2 && tokens[0] == "sensor_id") cloud.sensor_id = tokens[1];
  if (tokens.size() >= 2 && tokens[0] == "frame_label") cloud.frame_label = tokens[1];
}

inline PointCloud read_ply(std::istream& in, const std::string& path) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next() || line != "ply") parse_fail(path, line_no == 0 ? 1 : line_no, "missing 'ply' magic");

  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool saw_vertex = false;
  std::vector<std::string> props;
  while (true) {
    if (!next()) parse_fail(path, line_no, "unexpected end of header");
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") {
        throw Error(ErrorKind::UnsupportedFormat, path + ": only ASCII PLY is supported");
      }
    } else if (tok[0] == "comment") {
      apply_metadata({tok.begin() + 1, tok.end()}, cloud);
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_fail(path, line_no, "malformed element line");
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        vertex_count = static_cast<std::size_t>(parse_number(tok[2], line_no, path));
        saw_vertex = true;
      } else if (parse_number(tok[2], line_no, path) != 0.0) {
        throw Error(ErrorKind::UnsupportedFormat, path + ": only vertex elements are supported");
      }
    } else if (tok[0] == "property") {
      if (!in_vertex) continue;
      if (tok.size() != 3 || tok[1] == "list") {
        throw Error(ErrorKind::UnsupportedFormat, path + ": unsupported vertex property");
      }
      props.push_back(tok[2]);
    } else if (tok[0] != "obj_info") {
      parse_fail(path, line_no, "unknown header keyword '" + tok[0] + "'");
    }
  }
  if (!saw_vertex) parse_fail(path, line_no, "no vertex element");
  auto find = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (props[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  if (vertex_count > 0 && (ix < 0 || iy < 0 || iz < 0)) {
    throw Error(ErrorKind::UnsupportedFormat, path + ": vertex element lacks x/y/z");
  }
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;
  if (with_normals) cloud.normals.emplace();
  cloud.points.reserve(vertex_count);
  while (cloud.points.size() < vertex_count) {
    if (!next()) parse_fail(path, line_no + 1, "fewer vertices than declared");
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != props.size()) parse_fail(path, line_no, "wrong number of vertex fields");
    std::vector<double> v(tok.size());
    for (std::size_t i = 0; i < tok.size(); ++i) v[i] = parse_number(tok[i], line_no, path);
    cloud.points.emplace_back(v[ix], v[iy], v[iz]);
    if (with_normals) cloud.normals->emplace_back(v[inx], v[iny], v[inz]);
  }
  return cloud;
}

inline PointCloud read_pcd(std::istream& in, const std::string& path) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> fields;
  bool data = false;
  int ix = -1, iy = -1, iz = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (!data) {
      if (tok[0][0] == '#') {
        tok[0].erase(0, 1);
        if (tok[0].empty()) tok.erase(tok.begin());
        apply_metadata(tok, cloud);
      } else if (tok[0] == "FIELDS") {
        fields.assign(tok.begin() + 1, tok.end());
        for (std::size_t i = 0; i < fields.size(); ++i) {
          if (fields[i] == "x") ix = static_cast<int>(i);
          if (fields[i] == "y") iy = static_cast<int>(i);
          if (fields[i] == "z") iz = static_cast<int>(i);
        }
      } else if (tok[0] == "DATA") {
        if (tok.size() < 2 || tok[1] != "ascii") {
          throw Error(ErrorKind::UnsupportedFormat, path + ": only ASCII PCD is supported");
        }
        if (ix < 0 || iy < 0 || iz < 0) throw Error(ErrorKind::UnsupportedFormat, path + ": FIELDS lacks x y z");
        data = true;
      }
      // VERSION, SIZE, TYPE, COUNT, WIDTH, HEIGHT, VIEWPOINT, POINTS are informational.
      continue;
    }
    if (tok.size() != fields.size()) parse_fail(path, line_no, "wrong number of point fields");
    cloud.points.emplace_back(parse_number(tok[ix], line_no, path), parse_number(tok[iy], line_no, path),
                              parse_number(tok[iz], line_no, path));
  }
  if (!data) parse_fail(path, line_no, "missing DATA line");
  return cloud;
}

inline PointCloud read_csv(std::istream& in, const std::string& path) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[0] == '#') {
      apply_metadata(split_ws(line.substr(1)), cloud);
      continue;
    }
    std::vector<std::string> tok;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      tok.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
    }
    if (tok.size() != 3) parse_fail(path, line_no, "expected three comma-separated values");
    const bool header = first_data_line && !tok[0].empty() &&
                        (std::isalpha(static_cast<unsigned char>(tok[0][0])) != 0);
    first_data_line = false;
    if (header) continue;
    cloud.points.emplace_back(parse_number(tok[0], line_no, path), parse_number(tok[1], line_no, path),
                              parse_number(tok[2], line_no, path));
  }
  return cloud;
}

}  // namespace detail

inline PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  PointCloud cloud;
  switch (format) {
    case CloudFormat::PlyAscii: cloud = detail::read_ply(in, path.string()); break;
    case CloudFormat::PcdAscii: cloud = detail::read_pcd(in, path.string()); break;
    case CloudFormat::XyzCsv: cloud = detail::read_csv(in, path.string()); break;
  }
  return cloud;
}

inline PointCloud read_cloud(const std::filesystem::path& path) { return read_cloud(path, format_from_path(path)); }

inline std::string serialize_cloud(const PointCloud& cloud, CloudFormat format) {
  std::ostringstream out;
  const bool normals = cloud.normals.has_value();
  auto meta = [&](const std::string& prefix) {
    if (!cloud.sensor_id.empty()) out << prefix << "sensor_id " << cloud.sensor_id << '\n';
    if (!cloud.frame_label.empty()) out << prefix << "frame_label " << cloud.frame_label << '\n';
  };
  auto triple = [&](const Vec3& p, char sep) {
    out << format_number(p.x()) << sep << format_number(p.y()) << sep << format_number(p.z());
  };
  switch (format) {
    case CloudFormat::PlyAscii:
      out << "ply\nformat ascii 1.0\n";
      meta("comment ");
      out << "element vertex " << cloud.size() << '\n';
      out << "property float x\nproperty float y\nproperty float z\n";
      if (normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
      out << "end_header\n";
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        triple(cloud.points[i], ' ');
        if (normals) {
          out << ' ';
          triple((*cloud.normals)[i], ' ');
        }
        out << '\n';
      }
      break;
    case CloudFormat::PcdAscii:
      out << "# .PCD v0.7 - Point Cloud Data file format\n";
      meta("# ");
      out << "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n";
      out << "WIDTH " << cloud.size() << "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n";
      out << "POINTS " << cloud.size() << "\nDATA ascii\n";
      for (const auto& p : cloud.points) {
        triple(p, ' ');
        out << '\n';
      }
      break;
    case CloudFormat::XyzCsv:
      meta("# ");
      out << "x,y,z\n";
      for (const auto& p : cloud.points) {
        triple(p, ',');
        out << '\n';
      }
      break;
  }
  return out.str();
}

inline void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  write_text_atomically(path, serialize_cloud(cloud, format));
}

inline void write_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  write_cloud(cloud, path, format_from_path(path));
}

}  // namespace gmmcalib
