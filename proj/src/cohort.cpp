#include "itr/cohort.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "itr/csv.hpp"
#include <json.hpp>

namespace itr {

void validate_subject(const Subject& s, int k_max, int p) {
  if (s.a != 0 && s.a != 1) {
    throw std::invalid_argument("subject " + s.id + ": arm must be 0 or 1, got " +
                                std::to_string(s.a));
  }
  if (s.delta != 0 && s.delta != 1) {
    throw std::invalid_argument("subject " + s.id + ": event must be 0 or 1, got " +
                                std::to_string(s.delta));
  }
  if (s.t_tilde < 0 || s.t_tilde > k_max) {
    throw std::invalid_argument("subject " + s.id + ": time " + std::to_string(s.t_tilde) +
                                " outside {0,...," + std::to_string(k_max) + "}");
  }
  if (s.delta == 1 && s.t_tilde < 1) {
    throw std::invalid_argument("subject " + s.id + ": events occur at times >= 1");
  }
  if (s.w.size() != p) {
    throw std::invalid_argument("subject " + s.id + ": covariate length " +
                                std::to_string(s.w.size()) + " != " + std::to_string(p));
  }
}

LongitudinalRecord encode_longitudinal(const Subject& s, int k_max) {
  if (k_max < 1) throw std::invalid_argument("horizon must be >= 1");
  if (s.t_tilde > k_max) {
    throw std::invalid_argument("subject " + s.id + ": time " + std::to_string(s.t_tilde) +
                                " exceeds horizon " + std::to_string(k_max));
  }
  validate_subject(s, k_max, static_cast<int>(s.w.size()));

  LongitudinalRecord rec;
  rec.k_max = k_max;
  rec.r.assign(static_cast<std::size_t>(k_max), 0);
  rec.l.assign(static_cast<std::size_t>(k_max), 0);
  rec.i_risk.assign(static_cast<std::size_t>(k_max), 0);
  rec.j_risk.assign(static_cast<std::size_t>(k_max), 0);

  if (s.delta == 1) {
    rec.l[static_cast<std::size_t>(s.t_tilde - 1)] = 1;
  } else if (s.t_tilde < k_max) {
    // Administrative censoring (t_tilde == k_max) fires no indicator.
    rec.r[static_cast<std::size_t>(s.t_tilde)] = 1;
  }

  // I_m needs no event and no censoring strictly before m.
  for (int m = 1; m <= k_max; ++m) {
    const bool event_before = s.delta == 1 && s.t_tilde < m;
    const bool censored_before = s.delta == 0 && s.t_tilde < m && s.t_tilde < k_max;
    rec.i_risk[static_cast<std::size_t>(m - 1)] = (event_before || censored_before) ? 0 : 1;
  }
  // J_m additionally requires no event at m itself; J_0 is always 1.
  for (int m = 0; m < k_max; ++m) {
    const bool event_by = s.delta == 1 && s.t_tilde <= m;
    const bool censored_before = s.delta == 0 && s.t_tilde < m && s.t_tilde < k_max;
    rec.j_risk[static_cast<std::size_t>(m)] = (event_by || censored_before) ? 0 : 1;
  }
  return rec;
}

std::pair<int, int> decode_longitudinal(const LongitudinalRecord& rec) {
  for (int t = 1; t <= rec.k_max; ++t) {
    if (rec.l_at(t) == 1) return {1, t};
  }
  for (int t = 0; t < rec.k_max; ++t) {
    if (rec.r_at(t) == 1) return {0, t};
  }
  return {0, rec.k_max};
}

Subject Cohort::subject(int i) const {
  Subject s;
  s.id = ids[static_cast<std::size_t>(i)];
  s.w = w.row(i);
  s.a = a[i];
  s.delta = delta[i];
  s.t_tilde = t_tilde[i];
  return s;
}

Cohort Cohort::subset(const std::vector<int>& rows) const {
  Cohort out;
  out.k_max = k_max;
  out.w_names = w_names;
  const int m = static_cast<int>(rows.size());
  out.w.resize(m, w.cols());
  out.a.resize(m);
  out.delta.resize(m);
  out.t_tilde.resize(m);
  out.ids.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    out.ids.push_back(ids[static_cast<std::size_t>(r)]);
    out.w.row(i) = w.row(r);
    out.a[i] = a[r];
    out.delta[i] = delta[r];
    out.t_tilde[i] = t_tilde[r];
  }
  return out;
}

Cohort make_cohort(const std::vector<Subject>& subjects, int k_max,
                   std::vector<std::string> w_names) {
  if (k_max < 1) throw std::invalid_argument("horizon must be >= 1");
  const int n = static_cast<int>(subjects.size());
  const int p = n > 0 ? static_cast<int>(subjects[0].w.size()) : 0;

  Cohort c;
  c.k_max = k_max;
  if (w_names.empty()) {
    for (int j = 0; j < p; ++j) w_names.push_back("w" + std::to_string(j + 1));
  }
  if (static_cast<int>(w_names.size()) != p) {
    throw std::invalid_argument("covariate name count does not match dimension");
  }
  c.w_names = std::move(w_names);
  c.w.resize(n, p);
  c.a.resize(n);
  c.delta.resize(n);
  c.t_tilde.resize(n);

  std::set<std::string> seen;
  for (int i = 0; i < n; ++i) {
    const Subject& s = subjects[static_cast<std::size_t>(i)];
    validate_subject(s, k_max, p);
    if (!seen.insert(s.id).second) {
      throw std::invalid_argument("duplicate subject id: " + s.id);
    }
    c.ids.push_back(s.id);
    c.w.row(i) = s.w;
    c.a[i] = s.a;
    c.delta[i] = s.delta;
    c.t_tilde[i] = s.t_tilde;
  }
  return c;
}

RiskSetExpansion expand_risk_sets(const Cohort& c, int tau) {
  if (tau < 1 || tau > c.k_max) {
    throw std::invalid_argument("restriction time must lie in {1,...," +
                                std::to_string(c.k_max) + "}");
  }
  RiskSetExpansion out;
  out.event.kind = HazardKind::event;
  out.event.t_lo = 1;
  out.event.t_hi = tau - 1;
  out.cens.kind = HazardKind::censoring;
  out.cens.t_lo = 0;
  out.cens.t_hi = tau - 2;

  std::vector<int> event_counts(static_cast<std::size_t>(std::max(0, tau - 1)), 0);
  std::vector<int> cens_counts(static_cast<std::size_t>(std::max(0, tau - 1)), 0);

  for (int i = 0; i < c.n(); ++i) {
    const LongitudinalRecord rec = encode_longitudinal(c.subject(i), c.k_max);
    for (int m = 1; m <= tau - 1; ++m) {
      if (rec.i_at(m) == 1) {
        out.event.row.push_back(i);
        out.event.m.push_back(m);
        out.event.a.push_back(c.a[i]);
        out.event.y.push_back(static_cast<double>(rec.l_at(m)));
        ++event_counts[static_cast<std::size_t>(m - 1)];
      }
    }
    for (int m = 0; m <= tau - 2; ++m) {
      if (rec.j_at(m) == 1) {
        out.cens.row.push_back(i);
        out.cens.m.push_back(m);
        out.cens.a.push_back(c.a[i]);
        out.cens.y.push_back(static_cast<double>(rec.r_at(m)));
        ++cens_counts[static_cast<std::size_t>(m)];
      }
    }
  }

  for (int m = 1; m <= tau - 1; ++m) {
    if (event_counts[static_cast<std::size_t>(m - 1)] == 0) {
      out.warnings.push_back("empty event risk set at time " + std::to_string(m));
    }
  }
  for (int m = 0; m <= tau - 2; ++m) {
    if (cens_counts[static_cast<std::size_t>(m)] == 0) {
      out.warnings.push_back("empty censoring risk set at time " + std::to_string(m));
    }
  }
  return out;
}

CsvSchema read_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open schema file: " + path);
  nlohmann::json j;
  in >> j;
  if (!j.is_object()) throw std::invalid_argument("schema file must hold a JSON object");

  CsvSchema s;
  for (const auto& [key, value] : j.items()) {
    if (key == "id") {
      s.id = value.get<std::string>();
    } else if (key == "arm") {
      s.arm = value.get<std::string>();
    } else if (key == "event") {
      s.event = value.get<std::string>();
    } else if (key == "time") {
      s.time = value.get<std::string>();
    } else if (key == "covariates") {
      s.covariates = value.get<std::vector<std::string>>();
    } else if (key == "k_max") {
      s.k_max = value.get<int>();
    } else {
      throw std::invalid_argument("schema file: unknown key '" + key + "'");
    }
  }
  return s;
}

namespace {

int find_column(const std::vector<std::string>& header, const std::string& name,
                const std::string& role) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw std::invalid_argument("missing required column '" + name + "' (role: " + role + ")");
  }
  return static_cast<int>(it - header.begin());
}

int parse_binary(const std::string& field, const std::string& column, int line_no) {
  long long v = 0;
  if (!parse_int(field, v) || (v != 0 && v != 1)) {
    throw std::invalid_argument("row " + std::to_string(line_no) + ": column '" + column +
                                "' must be 0 or 1, got '" + field + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

Cohort read_cohort(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open cohort file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty cohort file: " + path);
  const std::vector<std::string> header = split_csv_line(line);

  const int id_col = find_column(header, schema.id, "id");
  const int arm_col = find_column(header, schema.arm, "arm");
  const int event_col = find_column(header, schema.event, "event");
  const int time_col = find_column(header, schema.time, "time");

  std::vector<int> cov_cols;
  std::vector<std::string> cov_names;
  if (schema.covariates.empty()) {
    for (int j = 0; j < static_cast<int>(header.size()); ++j) {
      if (j == id_col || j == arm_col || j == event_col || j == time_col) continue;
      cov_cols.push_back(j);
      cov_names.push_back(header[static_cast<std::size_t>(j)]);
    }
  } else {
    for (const auto& name : schema.covariates) {
      cov_cols.push_back(find_column(header, name, "covariate"));
      cov_names.push_back(name);
    }
  }

  std::vector<Subject> subjects;
  int line_no = 0;  // data-row index, header excluded
  int max_time = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::invalid_argument("row " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    Subject s;
    s.id = fields[static_cast<std::size_t>(id_col)];
    if (s.id.empty()) {
      throw std::invalid_argument("row " + std::to_string(line_no) + ": empty id");
    }
    s.a = parse_binary(fields[static_cast<std::size_t>(arm_col)], schema.arm, line_no);
    s.delta = parse_binary(fields[static_cast<std::size_t>(event_col)], schema.event, line_no);
    long long t = 0;
    if (!parse_int(fields[static_cast<std::size_t>(time_col)], t) || t < 0) {
      throw std::invalid_argument("row " + std::to_string(line_no) + ": column '" + schema.time +
                                  "' must be a nonnegative integer, got '" +
                                  fields[static_cast<std::size_t>(time_col)] + "'");
    }
    s.t_tilde = static_cast<int>(t);
    max_time = std::max(max_time, s.t_tilde);

    s.w.resize(static_cast<Eigen::Index>(cov_cols.size()));
    for (std::size_t j = 0; j < cov_cols.size(); ++j) {
      const std::string& field = fields[static_cast<std::size_t>(cov_cols[j])];
      double v = 0.0;
      if (!parse_double(field, v)) {
        throw std::invalid_argument("row " + std::to_string(line_no) + ": covariate column '" +
                                    cov_names[j] + "' has non-numeric value '" + field + "'");
      }
      s.w[static_cast<Eigen::Index>(j)] = v;
    }
    subjects.push_back(std::move(s));
  }

  const int k_max = schema.k_max > 0 ? schema.k_max : std::max(1, max_time);
  return make_cohort(subjects, k_max, cov_names);
}

void write_cohort_csv(const Cohort& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write cohort file: " + path);
  out << "id,arm,event,time";
  for (const auto& name : c.w_names) out << ',' << name;
  out << '\n';
  for (int i = 0; i < c.n(); ++i) {
    out << c.ids[static_cast<std::size_t>(i)] << ',' << c.a[i] << ',' << c.delta[i] << ','
        << c.t_tilde[i];
    for (int j = 0; j < c.p(); ++j) out << ',' << format_double(c.w(i, j));
    out << '\n';
  }
}

}  // namespace itr
