#include "lpvssid/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lpvssid/errors.hpp"

namespace lpvssid {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix(std::ostream& os, const std::string& tag, const Mat& m) {
  os << tag << " " << m.rows() << " " << m.cols() << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j)
      os << (j ? " " : "") << fmt(m(i, j));
    os << "\n";
  }
}

Mat read_matrix(std::istream& is, const std::string& expect_tag) {
  std::string tag;
  Index r, c;
  if (!(is >> tag >> r >> c) || tag != expect_tag)
    throw PipelineError(Stage::io, "model file: expected matrix '" + expect_tag +
                                       "', found '" + tag + "'");
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j)
      if (!(is >> m(i, j)))
        throw PipelineError(Stage::io, "model file: truncated matrix " + expect_tag);
  return m;
}

} // namespace

void save_model(std::ostream& os, const LpvSsModel& model,
                const SchedulingBasis& basis, const ModelDiagnostics* diag) {
  if (basis.family() != "affine" && basis.family() != "constant")
    throw PipelineError(Stage::io,
                        "custom basis evaluators cannot be serialized; only the "
                        "built-in families round-trip");
  os << "lpvssid-model 1\n";
  os << "n_x " << model.n_x << "\n";
  os << "n_u " << model.n_u << "\n";
  os << "n_y " << model.n_y << "\n";
  os << "n_p " << basis.n_p() << "\n";
  os << "basis " << basis.family() << "\n";
  os << "n_psi " << model.n_psi() << "\n";
  os << "p_lower";
  for (Index d = 0; d < basis.lower().size(); ++d) os << " " << fmt(basis.lower()(d));
  os << "\np_upper";
  for (Index d = 0; d < basis.upper().size(); ++d) os << " " << fmt(basis.upper()(d));
  os << "\n";
  const char* names = "ABCDK";
  const MatList* lists[] = {&model.A, &model.B, &model.C, &model.D, &model.K};
  for (int w = 0; w < 5; ++w)
    for (int i = 0; i <= model.n_psi(); ++i)
      write_matrix(os, std::string(1, names[w]) + std::to_string(i), (*lists[w])[i]);
  write_matrix(os, "Xi2", model.Xi2);

  if (diag) {
    os << "diagnostics\n";
    os << "method " << (diag->method.empty() ? "-" : diag->method) << "\n";
    os << "pre_estimation_converged " << (diag->pre_estimation_converged ? 1 : 0)
       << "\n";
    os << "ridge_lambda " << fmt(diag->ridge_lambda) << "\n";
    if (diag->log_likelihood)
      os << "log_likelihood " << fmt(*diag->log_likelihood) << "\n";
    os << "singular_values " << diag->singular_values.size();
    for (Index i = 0; i < diag->singular_values.size(); ++i)
      os << " " << fmt(diag->singular_values(i));
    os << "\n";
  }
}

void save_model(const std::string& path, const LpvSsModel& model,
                const SchedulingBasis& basis, const ModelDiagnostics* diag) {
  std::ofstream f(path);
  if (!f) throw PipelineError(Stage::io, "cannot write model file " + path);
  save_model(f, model, basis, diag);
}

LoadedModel load_model(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "lpvssid-model" || version != 1)
    throw PipelineError(Stage::io, "not a lpvssid model file");

  auto read_kv_int = [&](const char* key) {
    std::string k;
    int v;
    if (!(is >> k >> v) || k != key)
      throw PipelineError(Stage::io, std::string("model file: expected ") + key);
    return v;
  };
  const int n_x = read_kv_int("n_x");
  const int n_u = read_kv_int("n_u");
  const int n_y = read_kv_int("n_y");
  const int n_p = read_kv_int("n_p");
  std::string k, family;
  if (!(is >> k >> family) || k != "basis")
    throw PipelineError(Stage::io, "model file: expected basis family");
  const int n_psi = read_kv_int("n_psi");

  Vec lo(n_p), hi(n_p);
  if (!(is >> k) || k != "p_lower")
    throw PipelineError(Stage::io, "model file: expected p_lower");
  for (int d = 0; d < n_p; ++d) is >> lo(d);
  if (!(is >> k) || k != "p_upper")
    throw PipelineError(Stage::io, "model file: expected p_upper");
  for (int d = 0; d < n_p; ++d) is >> hi(d);

  SchedulingBasis basis =
      family == "affine" ? SchedulingBasis::affine(n_p, lo, hi)
      : family == "constant"
          ? SchedulingBasis::constant(n_p, lo, hi)
          : throw PipelineError(Stage::io, "unknown basis family " + family);
  if (basis.n_psi() != n_psi)
    throw PipelineError(Stage::io, "model file: n_psi inconsistent with basis family");

  LpvSsModel m;
  m.n_x = n_x;
  m.n_u = n_u;
  m.n_y = n_y;
  const char* names = "ABCDK";
  MatList* lists[] = {&m.A, &m.B, &m.C, &m.D, &m.K};
  for (int w = 0; w < 5; ++w)
    for (int i = 0; i <= n_psi; ++i)
      lists[w]->push_back(
          read_matrix(is, std::string(1, names[w]) + std::to_string(i)));
  m.Xi2 = read_matrix(is, "Xi2");
  m.validate();

  LoadedModel out{std::move(m), std::move(basis), std::nullopt};
  std::string tag;
  if (is >> tag && tag == "diagnostics") {
    ModelDiagnostics d;
    std::string key;
    while (is >> key) {
      if (key == "method") {
        is >> d.method;
      } else if (key == "pre_estimation_converged") {
        int v;
        is >> v;
        d.pre_estimation_converged = v != 0;
      } else if (key == "ridge_lambda") {
        is >> d.ridge_lambda;
      } else if (key == "log_likelihood") {
        double v;
        is >> v;
        d.log_likelihood = v;
      } else if (key == "singular_values") {
        Index n;
        is >> n;
        d.singular_values.resize(n);
        for (Index i = 0; i < n; ++i) is >> d.singular_values(i);
      } else {
        throw PipelineError(Stage::io, "model file: unknown diagnostics key " + key);
      }
    }
    out.diagnostics = std::move(d);
  }
  return out;
}

LoadedModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw PipelineError(Stage::io, "cannot read model file " + path);
  return load_model(f);
}

} // namespace lpvssid
