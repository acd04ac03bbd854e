#pragma once

// CSV emission. Floating-point cells use 17 significant digits so output is
// byte-stable and round-trips exactly; every table starts with a '#' comment
// row carrying the version and seed, then a fixed documented header row.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rdpflow/harness.hpp"
#include "rdpflow/version.hpp"

namespace rdpflow::cli {

inline std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string sweep_csv(const mc::SweepResult& result, std::uint64_t seed) {
  std::ostringstream os;
  os << "# rdpflow " << kVersion << " sweep seed=" << seed << "\n";
  os << "t,rho,alpha_bar_t,rate_bits_emp,rate_bits_se,rate_bits_theory,"
        "mse_emp,mse_se,mse_theory,w2sq_emp,w2sq_se,w2sq_theory,"
        "rate_mode,decode_mode,trials,cap_hits\n";
  for (const mc::SweepRow& r : result.rows) {
    os << r.t << ',' << csv_double(r.rho) << ',' << csv_double(r.alpha_bar_t) << ','
       << csv_double(r.rate_bits_emp) << ',' << csv_double(r.rate_bits_se) << ','
       << csv_double(r.rate_bits_theory) << ',' << csv_double(r.mse_emp) << ','
       << csv_double(r.mse_se) << ',' << csv_double(r.mse_theory) << ','
       << csv_double(r.w2sq_emp) << ',' << csv_double(r.w2sq_se) << ','
       << csv_double(r.w2sq_theory) << ','
       << (r.rate_mode == mc::RateMode::kKl ? "kl" : "zipf") << ','
       << (r.decode_mode == mc::DecodeMode::kClosedFormZt ? "closed-form-zt" : "full-chain")
       << ',' << r.trials << ',' << r.cap_hits << "\n";
  }
  return os.str();
}

// Generic table with a fixed header; infeasible rows are the caller's to mark.
inline std::string table_csv(const std::string& name, const std::vector<std::string>& columns,
                             const std::vector<std::vector<std::string>>& rows,
                             std::uint64_t seed) {
  std::ostringstream os;
  os << "# rdpflow " << kVersion << " " << name << " seed=" << seed << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing output file: " + path);
}

}  // namespace rdpflow::cli
