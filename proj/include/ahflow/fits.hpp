#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace ahflow {

struct TimeFit {
  double lambda1 = 0.0;  // -d log sup||h|| / dt
  double confidence = 0.0;  // standard error of lambda1
  double residual = 0.0;
  std::size_t samples = 0;
  bool non_decaying = false;
  bool below_noise_floor = false;
  bool refused = false;  // fewer than 8 usable samples
  std::string note;
};

struct SpaceFit {
  double gamma = 0.0;
  double confidence = 0.0;
  double residual = 0.0;
  std::size_t samples = 0;
  bool sign_change = false;
  bool below_noise_floor = false;
  bool refused = false;
  std::string note;
};

constexpr std::size_t kMinFitSamples = 8;

// Least squares of log y against t over [t_lo, t_hi]; samples at or below the
// noise floor are dropped before fitting.
TimeFit decay_fit_time(const std::vector<double>& t, const std::vector<double>& y, double t_lo,
                       double t_hi, double noise_floor = 0.0);

// Log-log fit of a field against x over [x_lo, x_hi]. noise may be empty, a
// single floor, or a per-point floor.
SpaceFit decay_fit_space(const std::vector<double>& x, const std::vector<double>& field, double x_lo,
                         double x_hi, const std::vector<double>& noise = {});

nlohmann::json to_json(const TimeFit& f);
nlohmann::json to_json(const SpaceFit& f);

}  // namespace ahflow
