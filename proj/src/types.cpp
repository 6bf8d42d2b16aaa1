#include "undrep/types.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>

namespace undrep {

json LinearModel::to_json() const {
  json j;
  j["alpha"] = alpha;
  j["beta"] = std::vector<double>(beta.data(), beta.data() + beta.size());
  j["feature_names"] = feature_names;
  return j;
}

LinearModel LinearModel::from_json(const json& j) {
  LinearModel m;
  m.alpha = j.at("alpha").get<double>();
  const auto b = j.at("beta").get<std::vector<double>>();
  m.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  if (j.contains("feature_names")) m.feature_names = j["feature_names"].get<std::vector<std::string>>();
  return m;
}

namespace {

std::string cell(Eigen::Index i, Eigen::Index j) {
  std::ostringstream os;
  os << "(" << i << "," << j << ")";
  return os.str();
}

}  // namespace

std::vector<std::string> validate_dataset(const Dataset& ds) {
  std::vector<std::string> out;
  const Eigen::Index n = ds.X.rows();
  const Eigen::Index d = ds.X.cols();

  if (static_cast<Eigen::Index>(ds.feature_names.size()) != d)
    out.push_back("feature_names length != d");
  if (static_cast<Eigen::Index>(ds.continuous_flags.size()) != d)
    out.push_back("continuous_flags length != d");
  if (ds.Z && (ds.Z->rows() != n || ds.Z->cols() != d)) out.push_back("Z shape != X shape");
  if (ds.xi_mask && (ds.xi_mask->rows() != n || ds.xi_mask->cols() != d))
    out.push_back("xi_mask shape != X shape");
  if (ds.G.size() != n) out.push_back("G length != n");
  if (ds.Y && ds.Y->size() != n) out.push_back("Y length != n");

  for (Eigen::Index i = 0; i < ds.G.size(); ++i) {
    if (ds.G[i] != 0 && ds.G[i] != 1) {
      out.push_back("G contains non-binary value " + std::to_string(ds.G[i]) + " at row " +
                    std::to_string(i));
      break;
    }
  }

  if (ds.xi_mask && ds.xi_mask->rows() == n && ds.xi_mask->cols() == d) {
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = (*ds.xi_mask)(i, j);
        if (v != 0.0 && v != 1.0) {
          out.push_back("xi_mask contains non-binary value at " + cell(i, j));
          goto mask_done;
        }
      }
    }
  mask_done:;
  }

  if (ds.Z && ds.xi_mask && ds.Z->rows() == n && ds.Z->cols() == d && ds.xi_mask->rows() == n &&
      ds.xi_mask->cols() == d) {
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (ds.X(i, j) != (*ds.Z)(i, j) * (*ds.xi_mask)(i, j)) {
          out.push_back("X != Z .* xi_mask at " + cell(i, j));
          goto prod_done;
        }
      }
    }
  prod_done:;
  }

  return out;
}

void GaussianPopulation::validate() const {
  const Eigen::Index dd = mu.size();
  if (sigma.rows() != dd || sigma.cols() != dd) throw DataError("sigma shape != d x d");
  if (beta.size() != dd) throw DataError("beta length != d");
  if (m0.size() != dd || m1.size() != dd) throw DataError("reporting rate vectors must have length d");
  if (!(r >= 0.0 && r <= 1.0)) throw DataError("group prevalence r must lie in [0,1]");
  for (Eigen::Index j = 0; j < dd; ++j) {
    if (!(m0[j] > 0.0 && m0[j] <= 1.0) || !(m1[j] > 0.0 && m1[j] <= 1.0))
      throw DataError("reporting rates must lie in (0,1]");
  }
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if (asym > 1e-10 * scale) throw DataError("sigma is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 1e-10 * scale)
    throw DataError("sigma is not positive definite");
}

json GaussianPopulation::to_json() const {
  json j;
  j["mu"] = std::vector<double>(mu.data(), mu.data() + mu.size());
  j["sigma"] = json::array();
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    std::vector<double> row(sigma.cols());
    for (Eigen::Index k = 0; k < sigma.cols(); ++k) row[static_cast<std::size_t>(k)] = sigma(i, k);
    j["sigma"].push_back(row);
  }
  j["alpha"] = alpha;
  j["beta"] = std::vector<double>(beta.data(), beta.data() + beta.size());
  j["r"] = r;
  j["m0"] = std::vector<double>(m0.data(), m0.data() + m0.size());
  j["m1"] = std::vector<double>(m1.data(), m1.data() + m1.size());
  return j;
}

GaussianPopulation GaussianPopulation::from_json(const json& j) {
  GaussianPopulation p;
  const auto mu = j.at("mu").get<std::vector<double>>();
  const auto d = static_cast<Eigen::Index>(mu.size());
  p.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), d);
  p.sigma.resize(d, d);
  const auto& sj = j.at("sigma");
  if (static_cast<Eigen::Index>(sj.size()) != d) throw DataError("sigma row count != d");
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto row = sj[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != d) throw DataError("sigma column count != d");
    for (Eigen::Index k = 0; k < d; ++k) p.sigma(i, k) = row[static_cast<std::size_t>(k)];
  }
  p.alpha = j.at("alpha").get<double>();
  const auto b = j.at("beta").get<std::vector<double>>();
  p.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  p.r = j.value("r", 0.5);
  auto load_rates = [&](const char* key) {
    if (!j.contains(key)) return Eigen::VectorXd(Eigen::VectorXd::Ones(d));
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() == 1) return Eigen::VectorXd(Eigen::VectorXd::Constant(d, v[0]));
    return Eigen::VectorXd(
        Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  p.m0 = load_rates("m0");
  p.m1 = load_rates("m1");
  p.validate();
  return p;
}

}  // namespace undrep
