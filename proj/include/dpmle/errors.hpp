#ifndef DPMLE_ERRORS_HPP
#define DPMLE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dpmle {

// Base class for all library errors.
struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/size mismatch between inputs (covariate row length, state counts, ...).
struct dimension_error : error {
  explicit dimension_error(const std::string& msg) : error(msg) {}
};

// Non-finite values or invalid numeric domain.
struct numeric_error : error {
  explicit numeric_error(const std::string& msg) : error(msg) {}
};

// All emission densities zero at some time point; names series and t.
struct underflow_error : error {
  underflow_error(const std::string& series, long t)
      : error("zero probability under every state in series '" + series +
              "' at t=" + std::to_string(t)),
        series_id(series), time_index(t) {}
  std::string series_id;
  long time_index;
};

// Linear system has no unique solution (reducible chain, ...).
struct singularity_error : error {
  explicit singularity_error(const std::string& msg) : error(msg) {}
};

// An iterative maximizer failed to make progress; carries the best value seen.
struct convergence_error : error {
  convergence_error(const std::string& msg, double best)
      : error(msg + " (best objective " + std::to_string(best) + ")"),
        best_objective(best) {}
  double best_objective;
};

struct parse_error : error {
  explicit parse_error(const std::string& msg) : error(msg) {}
};

struct config_error : error {
  explicit config_error(const std::string& msg) : error(msg) {}
};

struct io_error : error {
  explicit io_error(const std::string& msg) : error(msg) {}
};

}  // namespace dpmle

#endif
