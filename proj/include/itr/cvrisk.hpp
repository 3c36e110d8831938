#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace itr {

/// Out-of-fold candidate predictions and transformation targets. Row i was
/// predicted by models trained without fold(i); target(i) uses the nuisance
/// fitted without fold(i). weight = |target|, label = 1{target > 0}.
struct CvMatrix {
  Eigen::MatrixXd f;       // n x J
  Eigen::VectorXd target;  // transformation values
  Eigen::VectorXd weight;
  Eigen::VectorXd label;
  std::vector<int> fold;
  std::vector<std::string> ids;
  std::vector<std::string> candidate_names;

  int n() const { return static_cast<int>(f.rows()); }
  int j() const { return static_cast<int>(f.cols()); }

  /// Fills weight/label from target.
  void finalize_targets();
};

enum class Surrogate { hinge, log };

Surrogate surrogate_from_string(const std::string& s);
std::string surrogate_to_string(Surrogate s);

/// Mean squared error of the convex combination; alpha must lie on the
/// simplex (sum 1, nonnegative).
double cv_quadratic_risk(const CvMatrix& m, const Eigen::VectorXd& alpha);

/// Weighted misclassification of the sign rule d(z) = 1{f_alpha(z) > 0}
/// against 1{target > 0}; alpha must be nonnegative (scale-free).
double cv_zeroone_risk(const CvMatrix& m, const Eigen::VectorXd& alpha);

/// Weighted convex surrogate phi(f_alpha * (2 label - 1)); alpha >= 0.
double cv_surrogate_risk(const CvMatrix& m, const Eigen::VectorXd& alpha, Surrogate phi);

void write_cv_matrix_csv(const CvMatrix& m, const std::string& path);

}  // namespace itr
