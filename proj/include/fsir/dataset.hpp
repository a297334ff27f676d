#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fsir/errors.hpp"

namespace fsir {

// One longitudinally observed subject: N_i time/value pairs and one scalar
// response shared by all of the subject's observations.
struct Subject {
  std::string id;
  Eigen::VectorXd times;
  Eigen::VectorXd values;
  double response = 0.0;
};

// Intermittently observed trajectories on a common interval [t_min, t_max].
struct LongitudinalDataset {
  std::vector<Subject> subjects;
  double t_min = 0.0;
  double t_max = 1.0;

  int n() const { return static_cast<int>(subjects.size()); }

  long total_observations() const {
    long m = 0;
    for (const auto& s : subjects) m += static_cast<long>(s.times.size());
    return m;
  }
};

inline void validate_dataset(const LongitudinalDataset& data) {
  if (!(data.t_max > data.t_min))
    throw Error(ErrorKind::ConfigInvalid, "interval must satisfy t_min < t_max", "interval");
  if (data.subjects.empty())
    throw Error(ErrorKind::ConfigInvalid, "dataset has no subjects", "data");
  for (const auto& s : data.subjects) {
    if (s.times.size() != s.values.size())
      throw Error(ErrorKind::ConfigInvalid,
                  "subject '" + s.id + "' has mismatched time/value lengths", "data");
    if (s.times.size() < 1)
      throw Error(ErrorKind::ConfigInvalid, "subject '" + s.id + "' has no observations",
                  "data");
    for (Eigen::Index j = 0; j < s.times.size(); ++j) {
      const double t = s.times[j];
      if (!(t >= data.t_min && t <= data.t_max))
        throw Error(ErrorKind::OutOfInterval,
                    "subject '" + s.id + "' has time " + std::to_string(t) +
                        " outside [" + std::to_string(data.t_min) + ", " +
                        std::to_string(data.t_max) + "]");
    }
  }
}

inline std::pair<double, double> observed_time_range(const LongitudinalDataset& data) {
  double lo = data.t_max, hi = data.t_min;
  for (const auto& s : data.subjects)
    for (Eigen::Index j = 0; j < s.times.size(); ++j) {
      lo = std::min(lo, s.times[j]);
      hi = std::max(hi, s.times[j]);
    }
  return {lo, hi};
}

inline std::pair<double, double> response_range(const LongitudinalDataset& data) {
  double lo = data.subjects.front().response, hi = lo;
  for (const auto& s : data.subjects) {
    lo = std::min(lo, s.response);
    hi = std::max(hi, s.response);
  }
  return {lo, hi};
}

}  // namespace fsir
