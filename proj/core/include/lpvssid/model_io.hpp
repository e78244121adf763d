#ifndef LPVSSID_MODEL_IO_HPP
#define LPVSSID_MODEL_IO_HPP

#include <iosfwd>
#include <optional>
#include <string>

#include "lpvssid/basis.hpp"
#include "lpvssid/model.hpp"

namespace lpvssid {

// Optional diagnostics block appended to a serialized model.
struct ModelDiagnostics {
  Vec singular_values;
  std::optional<double> log_likelihood;
  std::string method;
  bool pre_estimation_converged = true;
  double ridge_lambda = 0.0;
};

// Plain-text model format: dimensions, basis family identifier and box,
// then every coefficient matrix row-major at full decimal precision.
// Only the built-in basis families ("affine", "constant") round-trip;
// custom evaluators cannot be serialized.
void save_model(std::ostream& os, const LpvSsModel& model,
                const SchedulingBasis& basis,
                const ModelDiagnostics* diag = nullptr);
void save_model(const std::string& path, const LpvSsModel& model,
                const SchedulingBasis& basis,
                const ModelDiagnostics* diag = nullptr);

struct LoadedModel {
  LpvSsModel model;
  SchedulingBasis basis;
  std::optional<ModelDiagnostics> diagnostics;
};

LoadedModel load_model(std::istream& is);
LoadedModel load_model(const std::string& path);

} // namespace lpvssid

#endif
