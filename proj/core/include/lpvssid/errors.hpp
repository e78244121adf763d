#ifndef LPVSSID_ERRORS_HPP
#define LPVSSID_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lpvssid {

// Pipeline stage an error is attributed to. Each identification failure
// carries exactly one stage so callers can map it to a distinct exit code.
enum class Stage {
  pre_estimation,
  data_equations,
  realization,
  ss_estimation,
  simulation,
  io,
};

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::pre_estimation: return "pre-estimation";
    case Stage::data_equations: return "data-equations";
    case Stage::realization: return "realization";
    case Stage::ss_estimation: return "ss-estimation";
    case Stage::simulation: return "simulation";
    case Stage::io: return "io";
  }
  return "unknown";
}

class PipelineError : public std::runtime_error {
 public:
  PipelineError(Stage stage, const std::string& what)
      : std::runtime_error(std::string("[") + stage_name(stage) + "] " + what),
        stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

// Thrown when a sample covariance required to be positive definite has an
// eigenvalue below tolerance; names the offending matrix.
class PersistencyError : public PipelineError {
 public:
  PersistencyError(const std::string& matrix_name, double min_eig, double tol)
      : PipelineError(Stage::realization,
                      "persistency of excitation violated: " + matrix_name +
                          " has eigenvalue " + std::to_string(min_eig) +
                          " below tolerance " + std::to_string(tol)) {}
};

} // namespace lpvssid

#endif
