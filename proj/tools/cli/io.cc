#include "cli/io.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cautious/error.h"

namespace cautious::cli {

namespace {

[[noreturn]] void Bad(const std::string& what) { Fail(ErrorCode::kConfig, what); }

bool ParseDouble(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool ParseRow(const std::string& line, std::vector<double>& row) {
  row.clear();
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    double x = 0.0;
    if (!ParseDouble(rest.substr(0, comma), x)) return false;
    row.push_back(x);
    if (comma == std::string_view::npos) return true;
    rest.remove_prefix(comma + 1);
  }
}

}  // namespace

std::filesystem::path Config::Resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base / p;
}

Config LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Bad("cannot open config " + path.string());
  Config config;
  try {
    config.root = Json::parse(in);
  } catch (const Json::parse_error& e) {
    Bad("config " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!config.root.is_object()) Bad("config root must be an object");
  config.base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return config;
}

Config EmptyConfig() { return Config{Json::object(), std::filesystem::path(".")}; }

void CheckKeys(const Json& object, std::initializer_list<const char*> allowed,
               const std::string& where) {
  if (!object.is_object()) Bad(where + " must be an object");
  for (const auto& item : object.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) Bad("unknown key '" + item.key() + "' in " + where);
  }
}

const Json& Member(const Json& object, const char* key, const std::string& where) {
  if (!object.contains(key)) Bad(where + " is missing '" + key + "'");
  return object.at(key);
}

double ReadNumber(const Json& value, const std::string& where) {
  if (!value.is_number()) Bad(where + " must be a number");
  return value.get<double>();
}

int ReadInt(const Json& value, const std::string& where) {
  if (!value.is_number_integer()) Bad(where + " must be an integer");
  return value.get<int>();
}

std::string ReadString(const Json& value, const std::string& where) {
  if (!value.is_string()) Bad(where + " must be a string");
  return value.get<std::string>();
}

bool ReadBool(const Json& value, const std::string& where) {
  if (!value.is_boolean()) Bad(where + " must be true or false");
  return value.get<bool>();
}

MatrixXd ReadMatrix(const Json& value, const std::string& where) {
  if (value.is_number()) return MatrixXd::Constant(1, 1, value.get<double>());
  if (!value.is_array()) Bad(where + " must be a number or an array");
  if (value.empty()) return MatrixXd(0, 0);
  if (!value.front().is_array()) {
    VectorXd v(static_cast<Eigen::Index>(value.size()));
    for (size_t i = 0; i < value.size(); ++i) v(static_cast<Eigen::Index>(i)) = ReadNumber(value[i], where);
    return v;
  }
  const auto rows = static_cast<Eigen::Index>(value.size());
  const auto cols = static_cast<Eigen::Index>(value.front().size());
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = value[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      Bad(where + " has rows of different lengths");
    }
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = ReadNumber(row[static_cast<size_t>(j)], where);
  }
  return m;
}

VectorXd ReadVector(const Json& value, const std::string& where) {
  const MatrixXd m = ReadMatrix(value, where);
  if (m.cols() != 1 && m.rows() != 1) Bad(where + " must be a vector");
  return m.cols() == 1 ? VectorXd(m.col(0)) : VectorXd(m.row(0).transpose());
}

MatrixXd ReadPoints(const Json& value, int dim, const std::string& where) {
  if (!value.is_array()) Bad(where + " must be an array of points");
  MatrixXd points(dim, static_cast<Eigen::Index>(value.size()));
  for (size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_array()) Bad(where + " must contain arrays");
    const VectorXd p = value[i].empty() ? VectorXd() : ReadVector(value[i], where);
    if (p.size() != dim) {
      Bad(where + " point " + std::to_string(i) + " has dimension " +
          std::to_string(p.size()) + ", expected " + std::to_string(dim));
    }
    points.col(static_cast<Eigen::Index>(i)) = p;
  }
  return points;
}

MatrixXd ReadCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Bad("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  std::string line;
  bool first = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    if (!ParseRow(line, row)) {
      if (first) {
        first = false;
        continue;
      }
      Bad(path.string() + ":" + std::to_string(line_no) + " is not a numeric row");
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size()) {
      Bad(path.string() + ":" + std::to_string(line_no) + " has a different column count");
    }
    rows.push_back(row);
  }
  if (rows.empty()) return MatrixXd(0, 0);
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

void WriteCsv(const std::filesystem::path& path, const MatrixXd& m,
              const std::vector<std::string>& header) {
  std::ostringstream out;
  for (size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (!header.empty()) out << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << FormatNumber(m(i, j));
    out << "\n";
  }
  WriteText(path, out.str());
}

BasisSet ReadBasis(const Json& d) {
  const std::string where = "basis";
  if (!d.is_object()) Bad("basis must be an object");
  const std::string family = ReadString(Member(d, "family", where), "basis.family");
  if (family == "polynomial") {
    CheckKeys(d, {"family", "n", "degree"}, where);
  } else if (family == "composite") {
    CheckKeys(d, {"family", "parts"}, where);
  } else {
    CheckKeys(d, {"family", "n"}, where);
  }
  auto dim = [&] {
    const int n = ReadInt(Member(d, "n", where), "basis.n");
    if (n < 1) Bad("basis.n must be positive");
    return n;
  };
  if (family == "affine") return AffineBasis(dim());
  if (family == "quadratic") return QuadraticBasis(dim());
  if (family == "separable_quadratic") return SeparableQuadraticBasis(dim());
  if (family == "polynomial") {
    const int n = dim();
    const int degree = ReadInt(Member(d, "degree", where), "basis.degree");
    if (degree < 0) Bad("basis.degree must be nonnegative");
    return PolynomialBasis(n, degree);
  }
  if (family == "trig2d") {
    if (d.contains("n") && ReadInt(d.at("n"), "basis.n") != 2) Bad("trig2d takes n = 2");
    return TrigBasis2d();
  }
  if (family == "composite") {
    const Json& parts = Member(d, "parts", where);
    if (!parts.is_array() || parts.size() < 2) Bad("basis.parts needs at least two bases");
    BasisSet result = ReadBasis(parts[0]);
    for (size_t i = 1; i < parts.size(); ++i) {
      const BasisSet next = ReadBasis(parts[i]);
      if (next.input_dim() != result.input_dim()) Bad("composite parts must share n");
      result = CompositeBasis(result, next);
    }
    return result;
  }
  Bad("unknown basis family '" + family + "'");
}

Json DescribeBasis(const std::string& family, int n, int degree) {
  Json d{{"family", family}};
  if (family != "trig2d") d["n"] = n;
  if (family == "polynomial") d["degree"] = degree;
  return d;
}

PartitionedSymmetric ReadNoise(const Json& d, int m, int samples) {
  const std::string where = "noise";
  const std::string type = ReadString(Member(d, "type", where), "noise.type");
  if (type == "energy") {
    CheckKeys(d, {"type", "Q"}, where);
    MatrixXd q = ReadMatrix(Member(d, "Q", where), "noise.Q");
    if (q.rows() == 1 && q.cols() == 1 && m > 1) q = q(0, 0) * MatrixXd::Identity(m, m);
    if (q.rows() != m || q.cols() != m) {
      Bad("noise.Q must be " + std::to_string(m) + " x " + std::to_string(m));
    }
    return EnergyNoiseModel(q, samples);
  }
  if (type == "dense") {
    CheckKeys(d, {"type", "Pi"}, where);
    const MatrixXd pi = ReadMatrix(Member(d, "Pi", where), "noise.Pi");
    if (pi.rows() != m + samples || pi.cols() != m + samples) {
      Bad("noise.Pi must be " + std::to_string(m + samples) + " square");
    }
    return PartitionedSymmetric(pi, m);
  }
  Bad("unknown noise type '" + type + "'");
}

Dataset ReadDataset(const Config& config, const Json& d, int input_dim) {
  CheckKeys(d, {"points", "values"}, "data");
  const MatrixXd points = ReadCsv(config.Resolve(ReadString(Member(d, "points", "data"), "data.points")));
  const MatrixXd values = ReadCsv(config.Resolve(ReadString(Member(d, "values", "data"), "data.values")));
  if (points.rows() == 0 || values.rows() == 0) Bad("data files must not be empty");
  if (points.rows() != values.rows()) Bad("points and values have different sample counts");
  if (points.cols() != input_dim) {
    Bad("points have " + std::to_string(points.cols()) + " columns, the basis expects " +
        std::to_string(input_dim));
  }
  return Dataset{points.transpose(), values.transpose()};
}

Box ReadBox(const Json& d, const std::string& where) {
  CheckKeys(d, {"lower", "upper"}, where);
  const VectorXd lo = ReadVector(Member(d, "lower", where), where + ".lower");
  const VectorXd hi = ReadVector(Member(d, "upper", where), where + ".upper");
  if (lo.size() != hi.size() || (lo.array() > hi.array()).any()) {
    Bad(where + " needs lower <= upper with equal lengths");
  }
  return MakeBox(lo, hi);
}

std::string FormatNumber(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

Json NumberJson(double x) {
  if (std::isfinite(x)) return x;
  return FormatNumber(x);
}

Json MatrixJson(const MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(NumberJson(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

Json VectorJson(const VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(NumberJson(v(i)));
  return out;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorCode::kConfig, "cannot write " + path.string());
  out << text;
}

void WriteJson(const std::filesystem::path& path, const Json& value) {
  WriteText(path, value.dump(2) + "\n");
}

}  // namespace cautious::cli
