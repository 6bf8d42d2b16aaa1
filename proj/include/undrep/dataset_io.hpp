#pragma once

#include <string>
#include <vector>

#include "undrep/types.hpp"

namespace undrep::io {

// RFC-4180-style CSV: quoted fields, embedded commas/quotes, CRLF or LF.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Eigen::Index col(const std::string& name) const;  // throws DataError if absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

std::string format_double(double v);             // shortest round-trip-exact decimal
double parse_double(const std::string& s, Eigen::Index row, const std::string& col);

// Dataset bundle: <base>.csv holds every matrix column (X, and Z/xi_mask when
// present) plus group/outcome, <base>.json holds metadata and provenance.
// Round-trips are bit-exact.
void save_dataset(const Dataset& ds, const std::string& base_path);
Dataset load_dataset(const std::string& base_path);

// Prediction file: CSV with columns pred,group.
void save_predictions(const std::string& path, const Eigen::VectorXd& pred,
                      const Eigen::VectorXi& groups);
std::pair<Eigen::VectorXd, Eigen::VectorXi> load_predictions(const std::string& path);

std::string sha256_file(const std::string& path);

}  // namespace undrep::io
