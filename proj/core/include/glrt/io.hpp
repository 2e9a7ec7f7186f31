#pragma once

#include <string>
#include <vector>

#include "glrt/matfun.hpp"

namespace glrt {

/// Shortest round-trip-exact decimal form of a double (%.17g semantics with
/// stable NaN/inf spellings); the one formatter used for all CSV output.
std::string format_double(double v);
double parse_double(const std::string& s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Matrices are stored as JSON nested arrays, row by row.
Matrix read_matrix_json(const std::string& path);
void write_matrix_json(const std::string& path, const Matrix& m);
std::vector<Matrix> read_matrix_list_json(const std::string& path);

}  // namespace glrt
