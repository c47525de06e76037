#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "hlg/group.hpp"

namespace hlg {

/**
 * @brief Outcome of one inequality or identity check.
 *
 * margin = rhs - lhs for "lhs <= rhs" checks. The record passes iff
 * margin >= -tolerance, where tolerance collects the statistical allowance
 * (3 sigma) and any deterministic slack. Both pieces are kept for auditing.
 */
struct VerificationRecord
{
  std::string record_id;
  std::string preset;
  int rank{0};
  double T{0.0};
  double p_or_q{0.0};
  std::vector<double> x;
  std::vector<double> y;
  double lhs{0.0};
  double rhs{0.0};
  double stderr_lhs{0.0};
  double stderr_rhs{0.0};
  double margin{0.0};
  double tolerance{0.0};
  bool pass{false};

  void finalize()
  {
    margin = rhs - lhs;
    pass = std::isfinite(margin) && margin >= -tolerance;
  }
};

inline std::vector<double> to_std(const Vector & v) { return {v.data(), v.data() + v.size()}; }
inline std::vector<double> to_std(const GroupElement & g) { return to_std(g.coords()); }

/// Shortest round-trip representation is not required; 17 significant digits always round-trips.
inline std::string format_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_point(const std::vector<double> & v)
{
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) { out += ' '; }
    out += format_double(v[k]);
  }
  return out;
}

inline const char * kRecordCsvHeader =
  "record_id,preset,rank,T,p_or_q,x,y,lhs,rhs,stderr_lhs,stderr_rhs,margin,pass,tolerance";

inline std::string to_csv_row(const VerificationRecord & r)
{
  std::ostringstream os;
  os << r.record_id << ',' << r.preset << ',' << r.rank << ',' << format_double(r.T) << ','
     << format_double(r.p_or_q) << ',' << format_point(r.x) << ',' << format_point(r.y) << ','
     << format_double(r.lhs) << ',' << format_double(r.rhs) << ',' << format_double(r.stderr_lhs) << ','
     << format_double(r.stderr_rhs) << ',' << format_double(r.margin) << ',' << (r.pass ? 1 : 0) << ','
     << format_double(r.tolerance);
  return os.str();
}

inline std::string records_to_csv(const std::vector<VerificationRecord> & records)
{
  std::string out = kRecordCsvHeader;
  out += '\n';
  for (const auto & r : records) {
    out += to_csv_row(r);
    out += '\n';
  }
  return out;
}

}  // namespace hlg
