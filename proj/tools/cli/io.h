#pragma once

// Config and file plumbing for the command line tool. Everything here throws
// cautious::Error with ErrorCode::kConfig on malformed input so the caller
// can map it to exit status 2.

#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cautious/basis.h"
#include "cautious/data.h"
#include "cautious/geometry.h"
#include "cautious/qmi.h"

namespace cautious::cli {

using Json = nlohmann::json;

// Parsed config plus the directory its relative paths refer to.
struct Config {
  Json root;
  std::filesystem::path base;

  std::filesystem::path Resolve(const std::string& path) const;
};

Config LoadConfig(const std::filesystem::path& path);
// An empty object rooted at the working directory.
Config EmptyConfig();

// Rejects keys outside `allowed`. `where` names the object in messages.
void CheckKeys(const Json& object, std::initializer_list<const char*> allowed,
               const std::string& where);
const Json& Member(const Json& object, const char* key, const std::string& where);

double ReadNumber(const Json& value, const std::string& where);
int ReadInt(const Json& value, const std::string& where);
std::string ReadString(const Json& value, const std::string& where);
bool ReadBool(const Json& value, const std::string& where);
// A number, a flat array (column vector) or an array of rows.
MatrixXd ReadMatrix(const Json& value, const std::string& where);
VectorXd ReadVector(const Json& value, const std::string& where);
// An array of points, each a flat array of the same length, returned as
// columns (n x count). An empty array gives an n x 0 matrix with n = `dim`.
MatrixXd ReadPoints(const Json& value, int dim, const std::string& where);

// Numeric CSV: one row per line, comma separated. Blank lines and lines
// starting with '#' are skipped; a first line that does not parse as numbers
// is treated as a header.
MatrixXd ReadCsv(const std::filesystem::path& path);
// Rows of `m` (no header unless given).
void WriteCsv(const std::filesystem::path& path, const MatrixXd& m,
              const std::vector<std::string>& header = {});

// {"family": affine | polynomial | quadratic | separable_quadratic | trig2d
//  | composite, "n", "degree", "parts"}.
BasisSet ReadBasis(const Json& descriptor);
Json DescribeBasis(const std::string& family, int n, int degree = 0);

// {"type": "energy", "Q": ...} for blkdiag(Q, -I_T), or {"type": "dense",
// "Pi": ...} for a dense matrix split at m.
PartitionedSymmetric ReadNoise(const Json& descriptor, int m, int samples);

// {"points": csv, "values": csv}; points are T x n and values T x m.
Dataset ReadDataset(const Config& config, const Json& descriptor, int input_dim);

Box ReadBox(const Json& descriptor, const std::string& where);

// Round-trip decimal form, with "inf", "-inf" and "nan" for the rest.
std::string FormatNumber(double x);
// Doubles stored as JSON numbers when finite and as the strings above
// otherwise (JSON has no infinity).
Json NumberJson(double x);
Json MatrixJson(const MatrixXd& m);
Json VectorJson(const VectorXd& v);

void WriteText(const std::filesystem::path& path, const std::string& text);
void WriteJson(const std::filesystem::path& path, const Json& value);

}  // namespace cautious::cli
