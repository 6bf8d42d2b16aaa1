#include "undrep/dataset_io.hpp"

#include <openssl/evp.h>

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace undrep::io {

Eigen::Index CsvTable::col(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<Eigen::Index>(i);
  throw DataError("column '" + name + "' not found in CSV header");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw DataError("unterminated quote on CSV line " + std::to_string(line_no));
  out.push_back(std::move(field));
  return out;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == EOF) break;
    auto fields = split_csv_line(line, line_no);
    if (line_no == 1) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size())
        throw DataError("CSV line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(t.header.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw DataError("missing header row in " + path);
  std::unordered_set<std::string> seen;
  for (const auto& h : t.header)
    if (!seen.insert(h).second) throw DataError("duplicate header column '" + h + "' in " + path);
  return t;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << quote_csv(table.header[i]);
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << quote_csv(row[i]);
    out << '\n';
  }
}

std::string format_double(double v) {
  char buf[32];
  // %.17g round-trips every IEEE double exactly.
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, Eigen::Index row, const std::string& col) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0') || errno == ERANGE)
    throw DataError("non-numeric cell '" + s + "' at data row " + std::to_string(row) +
                    ", column '" + col + "'");
  return v;
}

void save_dataset(const Dataset& ds, const std::string& base_path) {
  const Eigen::Index n = ds.n();
  const Eigen::Index d = ds.d();
  CsvTable t;
  for (const auto& name : ds.feature_names) t.header.push_back(name);
  if (ds.Z)
    for (const auto& name : ds.feature_names) t.header.push_back(name + "__z");
  if (ds.xi_mask)
    for (const auto& name : ds.feature_names) t.header.push_back(name + "__xi");
  t.header.push_back("__group");
  if (ds.Y) t.header.push_back("__outcome");

  t.rows.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::string> row;
    row.reserve(t.header.size());
    for (Eigen::Index j = 0; j < d; ++j) row.push_back(format_double(ds.X(i, j)));
    if (ds.Z)
      for (Eigen::Index j = 0; j < d; ++j) row.push_back(format_double((*ds.Z)(i, j)));
    if (ds.xi_mask)
      for (Eigen::Index j = 0; j < d; ++j) row.push_back(format_double((*ds.xi_mask)(i, j)));
    row.push_back(std::to_string(ds.G[i]));
    if (ds.Y) row.push_back(format_double((*ds.Y)[i]));
    t.rows.push_back(std::move(row));
  }
  write_csv(base_path + ".csv", t);

  json meta;
  meta["feature_names"] = ds.feature_names;
  meta["continuous_flags"] = std::vector<int>(ds.continuous_flags.begin(), ds.continuous_flags.end());
  meta["has_z"] = bool(ds.Z);
  meta["has_mask"] = bool(ds.xi_mask);
  meta["has_outcome"] = bool(ds.Y);
  meta["n"] = n;
  meta["provenance"] = ds.provenance;
  std::ofstream out(base_path + ".json", std::ios::binary);
  if (!out) throw DataError("cannot write file: " + base_path + ".json");
  out << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::string& base_path) {
  std::ifstream in(base_path + ".json", std::ios::binary);
  if (!in) throw DataError("cannot open file: " + base_path + ".json");
  json meta = json::parse(in);

  Dataset ds;
  ds.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
  const auto flags = meta.at("continuous_flags").get<std::vector<int>>();
  ds.continuous_flags.assign(flags.begin(), flags.end());
  ds.provenance = meta.value("provenance", json::object());
  const bool has_z = meta.value("has_z", false);
  const bool has_mask = meta.value("has_mask", false);
  const bool has_y = meta.value("has_outcome", false);

  const CsvTable t = read_csv(base_path + ".csv");
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const auto d = static_cast<Eigen::Index>(ds.feature_names.size());

  ds.X.resize(n, d);
  if (has_z) ds.Z.emplace(n, d);
  if (has_mask) ds.xi_mask.emplace(n, d);
  ds.G.resize(n);
  if (has_y) ds.Y.emplace(n);

  std::vector<Eigen::Index> xcol(d), zcol(d), mcol(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto& name = ds.feature_names[static_cast<std::size_t>(j)];
    xcol[j] = t.col(name);
    if (has_z) zcol[j] = t.col(name + "__z");
    if (has_mask) mcol[j] = t.col(name + "__xi");
  }
  const Eigen::Index gcol = t.col("__group");
  const Eigen::Index ycol = has_y ? t.col("__outcome") : -1;

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) {
      ds.X(i, j) = parse_double(row[xcol[j]], i, t.header[xcol[j]]);
      if (has_z) (*ds.Z)(i, j) = parse_double(row[zcol[j]], i, t.header[zcol[j]]);
      if (has_mask) (*ds.xi_mask)(i, j) = parse_double(row[mcol[j]], i, t.header[mcol[j]]);
    }
    ds.G[i] = static_cast<int>(parse_double(row[gcol], i, "__group"));
    if (has_y) (*ds.Y)[i] = parse_double(row[ycol], i, "__outcome");
  }
  return ds;
}

void save_predictions(const std::string& path, const Eigen::VectorXd& pred,
                      const Eigen::VectorXi& groups) {
  if (pred.size() != groups.size()) throw DataError("prediction/group length mismatch");
  CsvTable t;
  t.header = {"pred", "group"};
  t.rows.reserve(static_cast<std::size_t>(pred.size()));
  for (Eigen::Index i = 0; i < pred.size(); ++i)
    t.rows.push_back({format_double(pred[i]), std::to_string(groups[i])});
  write_csv(path, t);
}

std::pair<Eigen::VectorXd, Eigen::VectorXi> load_predictions(const std::string& path) {
  const CsvTable t = read_csv(path);
  const Eigen::Index pc = t.col("pred");
  const Eigen::Index gc = t.col("group");
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  Eigen::VectorXd pred(n);
  Eigen::VectorXi groups(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    pred[i] = parse_double(t.rows[static_cast<std::size_t>(i)][pc], i, "pred");
    groups[i] = static_cast<int>(parse_double(t.rows[static_cast<std::size_t>(i)][gc], i, "group"));
  }
  return {std::move(pred), std::move(groups)};
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.good()) {
    in.read(buf, sizeof(buf));
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    const unsigned char b = digest[i];
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xf]);
  }
  return out;
}

}  // namespace undrep::io
