#include "ahflow/fits.hpp"

#include <cmath>

#include "ahflow/numeric.hpp"

namespace ahflow {

TimeFit decay_fit_time(const std::vector<double>& t, const std::vector<double>& y, double t_lo,
                       double t_hi, double noise_floor) {
  TimeFit f;
  std::vector<double> ts, ly;
  std::size_t in_window = 0;
  for (std::size_t i = 0; i < t.size() && i < y.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    ++in_window;
    if (!(y[i] > noise_floor) || !(y[i] > 0)) continue;
    ts.push_back(t[i]);
    ly.push_back(std::log(y[i]));
  }
  f.samples = ts.size();
  if (in_window >= kMinFitSamples && ts.size() < kMinFitSamples) {
    f.below_noise_floor = true;
    f.refused = true;
    f.note = "series at or below the noise floor";
    return f;
  }
  if (ts.size() < kMinFitSamples) {
    f.refused = true;
    f.note = "fewer than 8 samples in window";
    return f;
  }
  auto lf = fit_line(ts, ly);
  f.lambda1 = -lf.slope;
  f.confidence = lf.slope_stderr;
  f.residual = lf.residual;
  if (lf.slope >= 0) {
    f.non_decaying = true;
    f.note = "non-decaying";
  }
  return f;
}

SpaceFit decay_fit_space(const std::vector<double>& x, const std::vector<double>& field, double x_lo,
                         double x_hi, const std::vector<double>& noise) {
  SpaceFit f;
  std::vector<double> lx, ly;
  std::size_t in_window = 0, below = 0;
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < x_lo || x[i] > x_hi) continue;
    ++in_window;
    if (field[i] > 0) pos = true;
    if (field[i] < 0) neg = true;
    const double floor = noise.empty() ? 0.0 : noise.size() == 1 ? noise[0] : noise[i];
    if (!(std::abs(field[i]) > floor)) {
      ++below;
      continue;
    }
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(std::abs(field[i])));
  }
  f.samples = lx.size();
  if (pos && neg) {
    f.sign_change = true;
    f.refused = true;
    f.note = "field changes sign in window";
    return f;
  }
  if (in_window > 0 && 2 * below > in_window) {
    f.below_noise_floor = true;
    f.refused = true;
    f.note = "field at or below the noise floor";
    return f;
  }
  if (lx.size() < kMinFitSamples) {
    f.refused = true;
    f.note = "fewer than 8 samples in window";
    return f;
  }
  auto lf = fit_line(lx, ly);
  f.gamma = lf.slope;
  f.confidence = lf.slope_stderr;
  f.residual = lf.residual;
  return f;
}

nlohmann::json to_json(const TimeFit& f) {
  return {{"lambda1", f.lambda1}, {"confidence", f.confidence}, {"residual", f.residual},
          {"samples", f.samples}, {"non_decaying", f.non_decaying},
          {"below_noise_floor", f.below_noise_floor}, {"refused", f.refused}, {"note", f.note}};
}

nlohmann::json to_json(const SpaceFit& f) {
  return {{"gamma", f.gamma}, {"confidence", f.confidence}, {"residual", f.residual},
          {"samples", f.samples}, {"sign_change", f.sign_change},
          {"below_noise_floor", f.below_noise_floor}, {"refused", f.refused}, {"note", f.note}};
}

}  // namespace ahflow
