#include "lowrank/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace lrlab {

namespace {

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_real(const std::string& token) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("malformed number '" + token + "'");
  }
  if (used != token.size()) throw std::invalid_argument("malformed number '" + token + "'");
  return value;
}

bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    return true;
  }
  return false;
}

}  // namespace

std::string format_complex(Complex z) {
  std::string im = format_real(z.imag());
  if (im.front() != '-') im.insert(im.begin(), '+');
  return format_real(z.real()) + im + "j";
}

Complex parse_complex(const std::string& token) {
  if (token.empty()) throw std::invalid_argument("empty matrix entry");
  if (token.back() != 'j') return {parse_real(token), 0.0};
  const std::string body = token.substr(0, token.size() - 1);
  // The split is the last sign that is not the leading sign and not part of
  // an exponent.
  for (std::size_t i = body.size(); i-- > 1;) {
    if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' && body[i - 1] != 'E')
      return {parse_real(body.substr(0, i)), parse_real(body.substr(i))};
  }
  return {0.0, parse_real(body)};
}

void write_matrix(std::ostream& out, const Mat& m) {
  out << m.rows() << ' ' << m.cols() << ' ' << to_string(m.field()) << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      const Complex z = m.entries()(i, j);
      out << (m.field() == Field::Real ? format_real(z.real()) : format_complex(z));
    }
    out << '\n';
  }
}

Mat read_matrix(std::istream& in) {
  std::string line;
  if (!next_content_line(in, line)) throw std::invalid_argument("missing matrix header");
  std::istringstream header(line);
  long n1 = 0, n2 = 0;
  std::string tag;
  if (!(header >> n1 >> n2 >> tag) || n1 < 1 || n2 < 1)
    throw std::invalid_argument("malformed matrix header '" + line + "'");
  const Field field = field_from_string(tag);
  CMatrix entries(n1, n2);
  for (long i = 0; i < n1; ++i) {
    if (!next_content_line(in, line))
      throw std::invalid_argument("matrix truncated at row " + std::to_string(i));
    std::istringstream row(line);
    std::string token;
    long j = 0;
    while (row >> token) {
      if (j >= n2) throw std::invalid_argument("too many entries in row " + std::to_string(i));
      entries(i, j++) = parse_complex(token);
    }
    if (j != n2) throw std::invalid_argument("too few entries in row " + std::to_string(i));
  }
  return Mat(std::move(entries), field);
}

void save_matrix(const std::string& path, const Mat& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_matrix(out, m);
}

Mat load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_matrix(in);
}

void save_vector(const std::string& path, const CVector& v, Field field) {
  CMatrix column = v;
  if (field == Field::Real) column = column.real().cast<Complex>();
  save_matrix(path, Mat(column, field));
}

CVector load_vector(const std::string& path) {
  Mat m = load_matrix(path);
  if (m.cols() != 1) throw std::invalid_argument("vector file must have exactly one column");
  return m.entries().col(0);
}

}  // namespace lrlab
