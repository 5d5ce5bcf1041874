#include "deepc/plant.hpp"

#include "deepc/errors.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>

namespace deepc {

BuildingModel BuildingModel::reference() {
  BuildingModel m;
  m.A.resize(3, 3);
  m.A << 0.8511, 0.0541, 0.0707,
         0.1293, 0.8635, 0.0055,
         0.0989, 0.0032, 0.7541;
  m.B.resize(3);
  m.B << 0.0035, 0.0003, 0.0002;
  m.E.resize(3, 3);
  m.E << 22.2170, 1.7912, 42.2123,
          1.5376, 0.6944, 2.9214,
        103.1813, 0.1032, 196.0444;
  m.E *= 1e-3;
  m.C.resize(3);
  m.C << 1.0, 0.0, 0.0;
  return m;
}

double BuildingModel::spectral_radius() const {
  Eigen::EigenSolver<Matrix> eig(A, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Vector BuildingModel::steady_state(double u, const Vector& w) const {
  const Matrix i_minus_a = Matrix::Identity(n_x(), n_x()) - A;
  return i_minus_a.partialPivLu().solve(B * u + E * w);
}

void BuildingModel::validate() const {
  const auto n = A.rows();
  if (A.cols() != n || B.size() != n || E.rows() != n || C.size() != n || n == 0) {
    throw DimensionError("BuildingModel: inconsistent matrix sizes");
  }
  if (step_seconds <= 0) throw ConfigError("BuildingModel: step_seconds must be positive");
}

PlantStep step_plant(const BuildingModel& model, const Vector& x, double u, const Vector& w) {
  if (!std::isfinite(u) || !w.allFinite() || !x.allFinite()) {
    throw ConfigError("step_plant: non-finite state or input");
  }
  if (w.size() != model.n_w() || x.size() != model.n_x()) {
    throw DimensionError("step_plant: state or disturbance has wrong size");
  }
  PlantStep s;
  s.y = model.C.dot(x);
  s.x_next = model.A * x + model.B * u + model.E * w;
  return s;
}

NoiseSource::NoiseSource(std::uint64_t seed, double amplitude)
    : stream_(seed), amplitude_(amplitude) {
  if (amplitude < 0.0) throw ConfigError("NoiseSource: amplitude must be >= 0");
}

double NoiseSource::next() {
  const double r = stream_.next(-1.0, 1.0);
  return amplitude_ * r;
}

double measure(double y_true, NoiseSource& noise) { return y_true + noise.next(); }

Vector rollout(const BuildingModel& model, Vector x0, const Vector& u, const Matrix& w) {
  if (w.cols() != u.size()) throw DimensionError("rollout: u and w lengths differ");
  Vector y(u.size());
  Vector x = std::move(x0);
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    auto s = step_plant(model, x, u(k), w.col(k));
    y(k) = s.y;
    x = std::move(s.x_next);
  }
  return y;
}

namespace {

Matrix matrix_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("plant config: missing '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError(std::string("plant config: '") + key + "' must be an array");
  if (!v.front().is_array()) {
    Matrix m(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i].get<double>();
    return m;
  }
  const auto rows = v.size();
  const auto cols = v.front().size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (v[i].size() != cols) throw ConfigError(std::string("plant config: ragged '") + key + "'");
    for (std::size_t k = 0; k < cols; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[i][k].get<double>();
    }
  }
  return m;
}

}  // namespace

BuildingModel building_model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("plant config: ") + e.what());
  }
  BuildingModel m;
  m.A = matrix_from(j, "A");
  m.B = matrix_from(j, "B").col(0);
  m.E = matrix_from(j, "E");
  m.C = matrix_from(j, "C").col(0).transpose();
  m.step_seconds = j.value("step_seconds", 600);
  m.validate();
  return m;
}

}  // namespace deepc
