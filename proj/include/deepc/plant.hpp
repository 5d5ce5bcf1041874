#pragma once

#include "deepc/datamodel.hpp"
#include "deepc/timeseries.hpp"

#include <cstdint>
#include <string>

namespace deepc {

/// Third-order single-zone building: x+ = A x + B u + E w, y = C x.
/// States are zone air, internal wall and external wall temperatures; u is
/// heating power in W; w is (ambient, solar, internal gains).
struct BuildingModel {
  Matrix A;
  Vector B;
  Matrix E;
  Eigen::RowVectorXd C;
  int step_seconds = 600;

  /// The published single-zone matrices.
  static BuildingModel reference();

  Eigen::Index n_x() const { return A.rows(); }
  Eigen::Index n_w() const { return E.cols(); }

  double spectral_radius() const;

  /// (I - A)^-1 (B u + E w).
  Vector steady_state(double u, const Vector& w) const;

  void validate() const;
};

struct PlantStep {
  Vector x_next;
  double y = 0.0;  // output at the current state, C x
};

PlantStep step_plant(const BuildingModel& model, const Vector& x, double u, const Vector& w);

/// Uniform measurement noise on [-amplitude, amplitude] from a seeded stream.
class NoiseSource {
 public:
  NoiseSource(std::uint64_t seed, double amplitude);

  double next();
  double amplitude() const { return amplitude_; }

 private:
  UniformStream stream_;
  double amplitude_;
};

double measure(double y_true, NoiseSource& noise);

/// Open-loop rollout; returns outputs y_k = C x_k for k = 0..steps-1.
Vector rollout(const BuildingModel& model, Vector x0, const Vector& u, const Matrix& w);

/// Reads {"A": [[..]], "B": [..], "E": [[..]], "C": [..]} from JSON text.
BuildingModel building_model_from_json(const std::string& text);

}  // namespace deepc
