#include "lpvssid/csv.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lpvssid/errors.hpp"

namespace lpvssid {

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void save_dataset_csv(const std::string& path, const DataSet& data,
                      bool include_xi) {
  data.validate();
  std::ofstream f(path);
  if (!f) throw PipelineError(Stage::io, "cannot write dataset " + path);
  f << "t";
  for (Index i = 0; i < data.u.rows(); ++i) f << ",u" << i + 1;
  for (Index i = 0; i < data.p.rows(); ++i) f << ",p" << i + 1;
  for (Index i = 0; i < data.y.rows(); ++i) f << ",y" << i + 1;
  if (include_xi && data.xi)
    for (Index i = 0; i < data.xi->rows(); ++i) f << ",xi" << i + 1;
  f << "\n";
  for (Index t = 0; t < data.N(); ++t) {
    f << t + 1;
    for (Index i = 0; i < data.u.rows(); ++i) f << "," << format_double(data.u(i, t));
    for (Index i = 0; i < data.p.rows(); ++i) f << "," << format_double(data.p(i, t));
    for (Index i = 0; i < data.y.rows(); ++i) f << "," << format_double(data.y(i, t));
    if (include_xi && data.xi)
      for (Index i = 0; i < data.xi->rows(); ++i)
        f << "," << format_double((*data.xi)(i, t));
    f << "\n";
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

} // namespace

namespace {

bool tagged_column(const std::string& col, const std::string& tag) {
  if (col.size() <= tag.size() || col.compare(0, tag.size(), tag) != 0)
    return false;
  for (std::size_t i = tag.size(); i < col.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(col[i]))) return false;
  return true;
}

} // namespace

DatasetHeader peek_dataset_header(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw PipelineError(Stage::io, "cannot read dataset " + path);
  std::string line;
  if (!std::getline(f, line))
    throw PipelineError(Stage::io, "empty dataset file " + path);
  DatasetHeader h;
  for (const std::string& col : split_csv_line(line)) {
    if (tagged_column(col, "xi")) h.has_xi = true;
    else if (tagged_column(col, "u")) h.n_u++;
    else if (tagged_column(col, "p")) h.n_p++;
    else if (tagged_column(col, "y")) h.n_y++;
  }
  if (h.n_u == 0 || h.n_p == 0 || h.n_y == 0)
    throw PipelineError(Stage::io, "dataset header lacks u/p/y columns in " + path);
  return h;
}

DataSet load_dataset_csv(const std::string& path, int n_u, int n_p, int n_y) {
  std::ifstream f(path);
  if (!f) throw PipelineError(Stage::io, "cannot read dataset " + path);
  std::string line;
  if (!std::getline(f, line))
    throw PipelineError(Stage::io, "empty dataset file " + path);
  const auto header = split_csv_line(line);
  const int expected_min = 1 + n_u + n_p + n_y;
  if (static_cast<int>(header.size()) < expected_min)
    throw PipelineError(Stage::io, "dataset header has too few columns in " + path);
  const bool has_xi = static_cast<int>(header.size()) >= expected_min + n_y;

  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) < expected_min)
      throw PipelineError(Stage::io, "dataset row with too few columns in " + path);
    std::vector<double> vals;
    vals.reserve(cells.size() - 1);
    for (std::size_t i = 1; i < cells.size(); ++i) {
      try {
        vals.push_back(std::stod(cells[i]));
      } catch (const std::exception&) {
        throw PipelineError(Stage::io, "dataset cell is not numeric in " + path);
      }
    }
    rows.push_back(std::move(vals));
  }
  const Index N = static_cast<Index>(rows.size());
  if (N == 0) throw PipelineError(Stage::io, "dataset has no samples: " + path);

  DataSet d;
  d.u.resize(n_u, N);
  d.p.resize(n_p, N);
  d.y.resize(n_y, N);
  if (has_xi) d.xi = Mat(n_y, N);
  for (Index t = 0; t < N; ++t) {
    const auto& v = rows[t];
    int at = 0;
    for (int i = 0; i < n_u; ++i) d.u(i, t) = v[at++];
    for (int i = 0; i < n_p; ++i) d.p(i, t) = v[at++];
    for (int i = 0; i < n_y; ++i) d.y(i, t) = v[at++];
    if (has_xi)
      for (int i = 0; i < n_y; ++i) (*d.xi)(i, t) = v[at++];
  }
  return d;
}

void save_results_csv(const std::string& path,
                      const std::vector<BenchmarkResultRow>& rows) {
  std::ofstream f(path);
  if (!f) throw PipelineError(Stage::io, "cannot write results " + path);
  f << "method,snr_db,n,bfr_sim_mean,bfr_sim_std,bfr_pred_mean,bfr_pred_std,failures\n";
  for (const auto& r : rows) {
    f << r.method << "," << format_double(r.snr_db) << "," << r.n << ","
      << format_double(r.bfr_sim_mean) << "," << format_double(r.bfr_sim_std)
      << "," << format_double(r.bfr_pred_mean) << ","
      << format_double(r.bfr_pred_std) << "," << r.failures << "\n";
  }
}

void save_eigenvalues_csv(const std::string& path,
                          const std::vector<EigenScatterRow>& rows) {
  std::ofstream f(path);
  if (!f) throw PipelineError(Stage::io, "cannot write eigenvalue scatter " + path);
  f << "method,run,matrix,re,im\n";
  for (const auto& r : rows)
    f << r.method << "," << r.run << "," << r.matrix << ","
      << format_double(r.re) << "," << format_double(r.im) << "\n";
}

void save_spectrum_csv(const std::string& path, const Vec& sv) {
  std::ofstream f(path);
  if (!f) throw PipelineError(Stage::io, "cannot write spectrum " + path);
  f << "index,singular_value\n";
  for (Index i = 0; i < sv.size(); ++i)
    f << i + 1 << "," << format_double(sv(i)) << "\n";
}

} // namespace lpvssid
