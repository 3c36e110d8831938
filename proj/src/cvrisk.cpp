#include "itr/cvrisk.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "itr/csv.hpp"

namespace itr {

void CvMatrix::finalize_targets() {
  const int rows = n();
  weight.resize(rows);
  label.resize(rows);
  for (int i = 0; i < rows; ++i) {
    weight[i] = std::abs(target[i]);
    label[i] = target[i] > 0.0 ? 1.0 : 0.0;
  }
}

Surrogate surrogate_from_string(const std::string& s) {
  if (s == "hinge") return Surrogate::hinge;
  if (s == "log") return Surrogate::log;
  throw std::invalid_argument("unknown surrogate: " + s);
}

std::string surrogate_to_string(Surrogate s) {
  return s == Surrogate::hinge ? "hinge" : "log";
}

namespace {

void check_alpha(const CvMatrix& m, const Eigen::VectorXd& alpha, bool simplex) {
  if (alpha.size() != m.j()) {
    throw std::invalid_argument("alpha length " + std::to_string(alpha.size()) +
                                " != candidate count " + std::to_string(m.j()));
  }
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (alpha[i] < 0.0) {
      throw std::invalid_argument("alpha has a negative entry at index " + std::to_string(i));
    }
  }
  if (simplex && std::abs(alpha.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("alpha must sum to one for the quadratic risk");
  }
}

}  // namespace

double cv_quadratic_risk(const CvMatrix& m, const Eigen::VectorXd& alpha) {
  check_alpha(m, alpha, /*simplex=*/true);
  if (m.n() == 0) return 0.0;
  const Eigen::VectorXd pred = m.f * alpha;
  return (m.target - pred).squaredNorm() / static_cast<double>(m.n());
}

double cv_zeroone_risk(const CvMatrix& m, const Eigen::VectorXd& alpha) {
  check_alpha(m, alpha, /*simplex=*/false);
  if (m.n() == 0) return 0.0;
  const Eigen::VectorXd score = m.f * alpha;
  double loss = 0.0;
  for (int i = 0; i < m.n(); ++i) {
    const double d = score[i] > 0.0 ? 1.0 : 0.0;  // ties treat as 0
    if (d != m.label[i]) loss += m.weight[i];
  }
  return loss / static_cast<double>(m.n());
}

double cv_surrogate_risk(const CvMatrix& m, const Eigen::VectorXd& alpha, Surrogate phi) {
  check_alpha(m, alpha, /*simplex=*/false);
  if (m.n() == 0) return 0.0;
  const Eigen::VectorXd score = m.f * alpha;
  double loss = 0.0;
  for (int i = 0; i < m.n(); ++i) {
    const double margin = score[i] * (2.0 * m.label[i] - 1.0);
    double value;
    if (phi == Surrogate::hinge) {
      value = margin < 1.0 ? 1.0 - margin : 0.0;
    } else {
      value = margin > 30.0 ? std::exp(-margin) : std::log1p(std::exp(-margin));
    }
    loss += m.weight[i] * value;
  }
  return loss / static_cast<double>(m.n());
}

void write_cv_matrix_csv(const CvMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write cv matrix file: " + path);
  out << "id,fold,target,weight,label";
  for (int j = 0; j < m.j(); ++j) {
    out << ",f_" << (j + 1);
  }
  out << '\n';
  for (int i = 0; i < m.n(); ++i) {
    out << m.ids[static_cast<std::size_t>(i)] << ',' << m.fold[static_cast<std::size_t>(i)] << ','
        << format_double(m.target[i]) << ',' << format_double(m.weight[i]) << ','
        << format_double(m.label[i]);
    for (int j = 0; j < m.j(); ++j) out << ',' << format_double(m.f(i, j));
    out << '\n';
  }
}

}  // namespace itr
