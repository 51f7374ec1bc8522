#include "stochlyap/catalog.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace stochlyap {

namespace {

class Params {
 public:
  Params(const std::string& model, const ParameterMap& given, std::set<std::string> allowed)
      : given_(given) {
    for (const auto& [key, value] : given) {
      if (!allowed.count(key)) {
        throw std::invalid_argument("model '" + model + "': unknown parameter '" + key + "'");
      }
      if (!std::isfinite(value)) {
        throw std::invalid_argument("model '" + model + "': parameter '" + key + "' not finite");
      }
    }
  }
  double get(const std::string& key, double fallback) const {
    auto it = given_.find(key);
    return it == given_.end() ? fallback : it->second;
  }

 private:
  const ParameterMap& given_;
};

Dynamics multiplicative_1d(const ParameterMap& p) {
  Params ps("multiplicative_1d", p, {"sigma0", "b"});
  const double sigma0 = ps.get("sigma0", 1.0);
  const double b = ps.get("b", 1.0);
  Dynamics d;
  d.name = "multiplicative_1d";
  d.drift = [b](auto x, auto u, auto out) { out[0] = b * u[0] * x[0]; };
  d.diffusion = [sigma0](auto x, auto, auto out) { out[0] = sigma0 * x[0]; };
  d.lipschitz_hint = std::abs(b) + std::abs(sigma0);
  return d;
}

Dynamics linear_1d(const ParameterMap& p) {
  Params ps("linear_1d", p, {"a", "b", "s", "m"});
  const double a = ps.get("a", -1.0), b = ps.get("b", 1.0);
  const double s = ps.get("s", 0.0), m = ps.get("m", 0.0);
  Dynamics d;
  d.name = "linear_1d";
  d.drift = [a, b](auto x, auto u, auto out) { out[0] = a * x[0] + b * u[0]; };
  d.diffusion = [s, m](auto x, auto, auto out) { out[0] = s + m * x[0]; };
  d.lipschitz_hint = std::abs(a) + std::abs(m);
  return d;
}

Dynamics sine_1d(const ParameterMap& p) {
  Params ps("sine_1d", p, {"s"});
  const double s = ps.get("s", 0.0);
  Dynamics d;
  d.name = "sine_1d";
  d.drift = [](auto x, auto, auto out) { out[0] = -x[0] + std::sin(x[0]); };
  d.diffusion = [s](auto, auto, auto out) { out[0] = s; };
  d.lipschitz_hint = 2.0;
  return d;
}

Dynamics constant(const ParameterMap& p) {
  Params ps("constant", p, {"c", "s", "n"});
  const double c = ps.get("c", 0.0), s = ps.get("s", 0.0);
  const double nd = ps.get("n", 1.0);
  if (nd < 1.0 || nd != std::floor(nd)) {
    throw std::invalid_argument("model 'constant': n must be a positive integer");
  }
  const auto n = static_cast<std::size_t>(nd);
  Dynamics d;
  d.name = "constant";
  d.dim_state = n;
  d.dim_noise = n;
  d.drift = [c](auto, auto, auto out) {
    for (auto& v : out) v = c;
  };
  d.diffusion = [s, n](auto, auto, auto out) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (i == j) ? s : 0.0;
  };
  d.lipschitz_hint = 0.0;
  return d;
}

Dynamics multiplicative_2d(const ParameterMap& p) {
  Params ps("multiplicative_2d", p, {"sigma0"});
  const double sigma0 = ps.get("sigma0", 1.0);
  Dynamics d;
  d.name = "multiplicative_2d";
  d.dim_state = 2;
  d.dim_noise = 2;
  d.drift = [](auto x, auto u, auto out) {
    out[0] = u[0] * x[0];
    out[1] = u[0] * x[1];
  };
  d.diffusion = [sigma0](auto x, auto, auto out) {
    out[0] = sigma0 * x[0];
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = sigma0 * x[1];
  };
  return d;
}

Dynamics correlated_2d(const ParameterMap& p) {
  Params ps("correlated_2d", p, {"k", "s", "rho"});
  const double k = ps.get("k", 1.0), s = ps.get("s", 0.3), rho = ps.get("rho", 0.5);
  Dynamics d;
  d.name = "correlated_2d";
  d.dim_state = 2;
  d.dim_noise = 2;
  d.dim_control = 2;
  d.drift = [k](auto x, auto u, auto out) {
    out[0] = -k * x[0] + u[0];
    out[1] = -k * x[1] + u[1];
  };
  d.diffusion = [s, rho](auto, auto, auto out) {
    out[0] = s;
    out[1] = s * rho;
    out[2] = 0.0;
    out[3] = s;
  };
  d.lipschitz_hint = std::abs(k);
  return d;
}

Dynamics rotation_2d(const ParameterMap& p) {
  Params ps("rotation_2d", p, {"c", "sigma0"});
  const double c = ps.get("c", 1.0), sigma0 = ps.get("sigma0", 0.5);
  Dynamics d;
  d.name = "rotation_2d";
  d.dim_state = 2;
  d.dim_noise = 2;
  d.drift = [c](auto x, auto u, auto out) {
    out[0] = -c * x[0] - u[0] * x[1];
    out[1] = -c * x[1] + u[0] * x[0];
  };
  d.diffusion = [sigma0](auto x, auto, auto out) {
    out[0] = sigma0 * x[0];
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = sigma0 * x[1];
  };
  return d;
}

}  // namespace

Dynamics make_dynamics(const std::string& name, const ParameterMap& params) {
  if (name == "multiplicative_1d") return multiplicative_1d(params);
  if (name == "linear_1d") return linear_1d(params);
  if (name == "sine_1d") return sine_1d(params);
  if (name == "constant") return constant(params);
  if (name == "multiplicative_2d") return multiplicative_2d(params);
  if (name == "correlated_2d") return correlated_2d(params);
  if (name == "rotation_2d") return rotation_2d(params);
  throw std::invalid_argument("unknown catalog model '" + name + "'");
}

ControlSet default_controls(const std::string& name, const ParameterMap&) {
  if (name == "multiplicative_1d" || name == "multiplicative_2d") {
    return ControlSet::scalars({-1.0, 1.0}, "sign control");
  }
  if (name == "linear_1d") return ControlSet::scalars({-1.0, 0.0, 1.0}, "u in {-1,0,1}");
  if (name == "rotation_2d") return ControlSet::scalars({-1.0, 0.0, 1.0}, "rotation rate");
  if (name == "correlated_2d") {
    return ControlSet(2, {0.0, 0.0, -0.5, 0.0, 0.5, 0.0, 0.0, -0.5, 0.0, 0.5}, "axis pushes");
  }
  if (name == "sine_1d" || name == "constant") {
    return ControlSet::scalars({0.0}, "uncontrolled");
  }
  throw std::invalid_argument("unknown catalog model '" + name + "'");
}

std::vector<std::string> catalog_names() {
  return {"multiplicative_1d", "linear_1d",     "sine_1d",    "constant",
          "multiplicative_2d", "correlated_2d", "rotation_2d"};
}

}  // namespace stochlyap
