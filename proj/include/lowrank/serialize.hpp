#pragma once

#include <iosfwd>
#include <string>

#include "lowrank/core.hpp"

namespace lrlab {

// Plain-text matrix format:
//
//   <n1> <n2> <real|complex>
//   <row 0 entries, whitespace separated>
//   ...
//
// Complex entries are written as "re+imj" / "re-imj" with 17 significant
// digits so that a write/read cycle is bit-exact. Lines starting with '#'
// are comments. Real matrices may also be read when entries carry a zero
// imaginary part.

void write_matrix(std::ostream& out, const Mat& m);
Mat read_matrix(std::istream& in);

void save_matrix(const std::string& path, const Mat& m);
Mat load_matrix(const std::string& path);

/// Column vectors travel as n x 1 matrices.
void save_vector(const std::string& path, const CVector& v, Field field);
CVector load_vector(const std::string& path);

std::string format_complex(Complex z);
Complex parse_complex(const std::string& token);

}  // namespace lrlab
