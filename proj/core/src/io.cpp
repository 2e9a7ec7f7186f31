#include "glrt/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "glrt/errors.hpp"

namespace glrt {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) raise(ErrorKind::BadConfig, "parse_double: trailing characters in '" + s + "'");
  return v;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::BadConfig, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::BadConfig, "cannot open '" + path + "' for writing");
  out << content;
  if (!out) raise(ErrorKind::BadConfig, "failed writing '" + path + "'");
}

namespace {

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    raise(ErrorKind::BadConfig, "matrix JSON must be a nested array of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols)
      raise(ErrorKind::BadConfig, "matrix JSON has ragged rows");
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Matrix read_matrix_json(const std::string& path) {
  return matrix_from_json(nlohmann::json::parse(read_text_file(path)));
}

void write_matrix_json(const std::string& path, const Matrix& m) {
  write_text_file(path, matrix_to_json(m).dump(2) + "\n");
}

std::vector<Matrix> read_matrix_list_json(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_text_file(path));
  if (!j.is_array()) raise(ErrorKind::BadConfig, "expected a JSON array of matrices");
  std::vector<Matrix> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(matrix_from_json(item));
  return out;
}

}  // namespace glrt
