#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace itr {

/// One participant: baseline covariates w, arm a in {0,1}, event indicator
/// delta in {0,1}, and follow-up time t_tilde on the integer grid {0,...,K}.
/// delta = 1 means the event was observed at t_tilde (so t_tilde >= 1);
/// delta = 0 with t_tilde = K is administrative end of follow-up.
struct Subject {
  std::string id;
  Eigen::VectorXd w;
  int a = 0;
  int delta = 0;
  int t_tilde = 0;
};

/// Throws std::invalid_argument with a descriptive message on violation.
void validate_subject(const Subject& s, int k_max, int p);

/// Longitudinal encoding of one subject over the horizon K:
///   r[t]     = censored exactly at t,            t in {0,...,K-1}
///   l[t-1]   = event exactly at t,               t in {1,...,K}
///   i_risk[m-1] = at risk of an observed event at m (no prior event or
///                 censoring strictly before m),  m in {1,...,K}
///   j_risk[m]   = at risk of censoring at m (no prior censoring, no event
///                 up to and including m),        m in {0,...,K-1}
struct LongitudinalRecord {
  int k_max = 0;
  std::vector<int> r;
  std::vector<int> l;
  std::vector<int> i_risk;
  std::vector<int> j_risk;

  int r_at(int t) const { return r[static_cast<std::size_t>(t)]; }
  int l_at(int t) const { return l[static_cast<std::size_t>(t - 1)]; }
  int i_at(int m) const { return i_risk[static_cast<std::size_t>(m - 1)]; }
  int j_at(int m) const { return j_risk[static_cast<std::size_t>(m)]; }
};

LongitudinalRecord encode_longitudinal(const Subject& s, int k_max);

/// Inverse of the encoding: recovers (delta, t_tilde). A record with no
/// indicator fired decodes to administrative censoring at K.
std::pair<int, int> decode_longitudinal(const LongitudinalRecord& rec);

/// Immutable table of subjects sharing one horizon and covariate dimension.
struct Cohort {
  std::vector<std::string> ids;
  std::vector<std::string> w_names;  // covariate column names
  Eigen::MatrixXd w;                 // n x p
  Eigen::VectorXi a;
  Eigen::VectorXi delta;
  Eigen::VectorXi t_tilde;
  int k_max = 0;

  int n() const { return static_cast<int>(ids.size()); }
  int p() const { return static_cast<int>(w.cols()); }
  Subject subject(int i) const;
  Cohort subset(const std::vector<int>& rows) const;
};

/// Builds and validates a cohort; unique ids, shared K and p enforced.
Cohort make_cohort(const std::vector<Subject>& subjects, int k_max,
                   std::vector<std::string> w_names = {});

enum class HazardKind { event, censoring };

/// Person-period expansion: one row per (subject, time) pair at risk.
/// Event tables carry y = 1{event at m}; censoring tables y = 1{censored
/// at m}. `t_lo`/`t_hi` record the inclusive time range covered.
struct RiskSetTable {
  HazardKind kind = HazardKind::event;
  int t_lo = 0;
  int t_hi = -1;  // empty range allowed (tau = 1)
  std::vector<int> row;  // subject index into the source cohort
  std::vector<int> m;
  std::vector<int> a;
  std::vector<double> y;

  std::size_t size() const { return row.size(); }
};

struct RiskSetExpansion {
  RiskSetTable event;
  RiskSetTable cens;
  std::vector<std::string> warnings;  // empty risk sets, surfaced not thrown
};

/// Expands a cohort under restriction time tau: event rows for m in
/// {1,...,tau-1}, censoring rows for m in {0,...,tau-2}.
RiskSetExpansion expand_risk_sets(const Cohort& c, int tau);

/// Column mapping for cohort CSV files. Covariates default to every column
/// not claimed by a role, in header order. k_max = 0 infers max(time).
struct CsvSchema {
  std::string id = "id";
  std::string arm = "arm";
  std::string event = "event";
  std::string time = "time";
  std::vector<std::string> covariates;
  int k_max = 0;
};

CsvSchema read_schema_file(const std::string& path);

Cohort read_cohort(const std::string& path, const CsvSchema& schema = {});

void write_cohort_csv(const Cohort& c, const std::string& path);

}  // namespace itr
