#ifndef LPVSSID_CSV_HPP
#define LPVSSID_CSV_HPP

#include <string>
#include <vector>

#include "lpvssid/model.hpp"
#include "lpvssid/types.hpp"

namespace lpvssid {

// Dataset CSV: header "t,u1..,p1..,y1.." plus optional xi1.. columns when the
// record carries innovations; one row per sample, full decimal precision.
void save_dataset_csv(const std::string& path, const DataSet& data,
                      bool include_xi);
DataSet load_dataset_csv(const std::string& path, int n_u, int n_p, int n_y);

// Header introspection so the CLI can infer dimensions: returns the column
// counts found for each signal group.
struct DatasetHeader {
  int n_u = 0, n_p = 0, n_y = 0;
  bool has_xi = false;
};
DatasetHeader peek_dataset_header(const std::string& path);

struct BenchmarkResultRow {
  std::string method;
  double snr_db; // +inf encoded as "inf"
  Index n;
  double bfr_sim_mean, bfr_sim_std;
  double bfr_pred_mean, bfr_pred_std;
  int failures;
};

void save_results_csv(const std::string& path,
                      const std::vector<BenchmarkResultRow>& rows);

struct EigenScatterRow {
  std::string method;
  int run;
  std::string matrix; // "A0" or "A1"
  double re, im;
};

void save_eigenvalues_csv(const std::string& path,
                          const std::vector<EigenScatterRow>& rows);

// Singular-value spectrum, one "index,value" row per entry.
void save_spectrum_csv(const std::string& path, const Vec& sv);

std::string format_double(double v); // %.17g, shared by every writer

} // namespace lpvssid

#endif
