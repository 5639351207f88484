#pragma once

// File formats: instance JSON, trace CSV, binary PPM images and ASCII point
// clouds.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pot/core.hpp"

namespace pot {

namespace detail {

// Shortest round-trippable decimal form, locale-independent.
inline std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw PotError(ErrorCode::IoFailure, "cannot open " + path);
  std::ostringstream out;
  out << stream.rdbuf();
  return out.str();
}

}  // namespace detail

// Instance documents use keys "r", "c", "C" (row-major) and "s". The cost
// may be a flat row-major array of n^2 numbers or an array of n rows.
inline Instance instance_from_json(const nlohmann::json& doc) {
  if (!doc.contains("r") || !doc.contains("c") || !doc.contains("C") ||
      !doc.contains("s")) {
    throw PotError(ErrorCode::IoFailure, "instance needs keys r, c, C, s");
  }
  Instance in;
  const auto& jr = doc.at("r");
  const auto& jc = doc.at("c");
  const Eigen::Index n = static_cast<Eigen::Index>(jr.size());
  in.r = Vector(n);
  for (Eigen::Index i = 0; i < n; ++i) in.r(i) = jr.at(i).get<double>();
  if (static_cast<Eigen::Index>(jc.size()) != n) {
    throw PotError(ErrorCode::IoFailure, "r and c lengths differ");
  }
  in.c = Vector(n);
  for (Eigen::Index i = 0; i < n; ++i) in.c(i) = jc.at(i).get<double>();
  const auto& jC = doc.at("C");
  in.C = Matrix(n, n);
  if (!jC.empty() && jC.at(0).is_array()) {
    if (static_cast<Eigen::Index>(jC.size()) != n) {
      throw PotError(ErrorCode::IoFailure, "cost row count mismatch");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = jC.at(i);
      if (static_cast<Eigen::Index>(row.size()) != n) {
        throw PotError(ErrorCode::IoFailure, "cost column count mismatch");
      }
      for (Eigen::Index j = 0; j < n; ++j) in.C(i, j) = row.at(j).get<double>();
    }
  } else {
    if (static_cast<Eigen::Index>(jC.size()) != n * n) {
      throw PotError(ErrorCode::IoFailure, "flat cost must have n^2 entries");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        in.C(i, j) = jC.at(i * n + j).get<double>();
      }
    }
  }
  in.s = doc.at("s").get<double>();
  return in;
}

inline nlohmann::json instance_to_json(const Instance& in) {
  nlohmann::json doc;
  doc["r"] = std::vector<double>(in.r.data(), in.r.data() + in.r.size());
  doc["c"] = std::vector<double>(in.c.data(), in.c.data() + in.c.size());
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(in.C.size()));
  for (Eigen::Index i = 0; i < in.C.rows(); ++i) {
    for (Eigen::Index j = 0; j < in.C.cols(); ++j) flat.push_back(in.C(i, j));
  }
  doc["C"] = flat;
  doc["s"] = in.s;
  return doc;
}

inline Instance read_instance_json(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw PotError(ErrorCode::IoFailure, path + ": " + e.what());
  }
  return instance_from_json(doc);
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream stream(path, std::ios::binary);
  if (!stream) throw PotError(ErrorCode::IoFailure, "cannot write " + path);
  stream << body;
}

inline void write_instance_json(const std::string& path, const Instance& in) {
  write_text_file(path, instance_to_json(in).dump(2) + "\n");
}

inline std::string trace_to_csv(const ConvergenceTrace& trace) {
  std::string out = "t,E,phi,rounded_cost,elapsed_s\n";
  for (const auto& rec : trace.records) {
    out += std::to_string(rec.t);
    out += ',';
    out += detail::format_double(rec.error);
    out += ',';
    out += detail::format_double(rec.phi);
    out += ',';
    if (rec.rounded_cost) out += detail::format_double(*rec.rounded_cost);
    out += ',';
    out += detail::format_double(rec.elapsed_s);
    out += '\n';
  }
  return out;
}

inline void write_trace_csv(const std::string& path, const ConvergenceTrace& trace) {
  write_text_file(path, trace_to_csv(trace));
}

inline nlohmann::json plan_to_json(const TransportPlan& plan) {
  nlohmann::json doc;
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(plan.X.rows()));
  for (Eigen::Index i = 0; i < plan.X.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(plan.X.cols()));
    for (Eigen::Index j = 0; j < plan.X.cols(); ++j) {
      row[static_cast<std::size_t>(j)] = plan.X(i, j);
    }
    rows.push_back(std::move(row));
  }
  doc["X"] = rows;
  doc["mass"] = plan.mass;
  doc["row_slack"] =
      std::vector<double>(plan.row_slack.data(),
                          plan.row_slack.data() + plan.row_slack.size());
  doc["col_slack"] =
      std::vector<double>(plan.col_slack.data(),
                          plan.col_slack.data() + plan.col_slack.size());
  return doc;
}

// 8-bit binary PPM (P6).
struct Image {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;  // 3 bytes per pixel, row-major

  int pixel_count() const { return width * height; }
};

inline Image read_ppm(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw PotError(ErrorCode::IoFailure, "cannot open " + path);
  std::string magic;
  stream >> magic;
  if (magic != "P6") {
    throw PotError(ErrorCode::IoFailure, path + ": expected binary PPM (P6)");
  }
  const auto next_int = [&]() {
    // Skip whitespace and '#' comment lines between header fields.
    while (true) {
      const int ch = stream.peek();
      if (ch == '#') {
        std::string line;
        std::getline(stream, line);
      } else if (std::isspace(ch)) {
        stream.get();
      } else {
        break;
      }
    }
    int value = 0;
    if (!(stream >> value)) {
      throw PotError(ErrorCode::IoFailure, path + ": malformed PPM header");
    }
    return value;
  };
  Image img;
  img.width = next_int();
  img.height = next_int();
  const int maxval = next_int();
  if (img.width <= 0 || img.height <= 0 || maxval != 255) {
    throw PotError(ErrorCode::IoFailure, path + ": unsupported PPM header");
  }
  stream.get();  // single whitespace after maxval
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  stream.read(reinterpret_cast<char*>(img.rgb.data()),
              static_cast<std::streamsize>(img.rgb.size()));
  if (stream.gcount() != static_cast<std::streamsize>(img.rgb.size())) {
    throw PotError(ErrorCode::IoFailure, path + ": truncated pixel data");
  }
  return img;
}

inline void write_ppm(const std::string& path, const Image& img) {
  std::ofstream stream(path, std::ios::binary);
  if (!stream) throw PotError(ErrorCode::IoFailure, "cannot write " + path);
  stream << "P6\n" << img.width << " " << img.height << "\n255\n";
  stream.write(reinterpret_cast<const char*>(img.rgb.data()),
               static_cast<std::streamsize>(img.rgb.size()));
}

// Point clouds: one "x y z" triple per line.
inline Matrix read_xyz(const std::string& path) {
  std::ifstream stream(path);
  if (!stream) throw PotError(ErrorCode::IoFailure, "cannot open " + path);
  std::vector<double> values;
  double x = 0, y = 0, z = 0;
  while (stream >> x >> y >> z) {
    values.push_back(x);
    values.push_back(y);
    values.push_back(z);
  }
  if (values.empty()) {
    throw PotError(ErrorCode::IoFailure, path + ": no points");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(values.size() / 3);
  Matrix pts(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    pts(i, 0) = values[static_cast<std::size_t>(3 * i)];
    pts(i, 1) = values[static_cast<std::size_t>(3 * i + 1)];
    pts(i, 2) = values[static_cast<std::size_t>(3 * i + 2)];
  }
  return pts;
}

inline void write_xyz(const std::string& path, const Matrix& pts) {
  if (pts.cols() != 3) {
    throw PotError(ErrorCode::DimensionMismatch, "point cloud must be N x 3");
  }
  std::string body;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    body += detail::format_double(pts(i, 0));
    body += ' ';
    body += detail::format_double(pts(i, 1));
    body += ' ';
    body += detail::format_double(pts(i, 2));
    body += '\n';
  }
  write_text_file(path, body);
}

}  // namespace pot
