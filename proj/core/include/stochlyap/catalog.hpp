#pragma once

#include <map>
#include <string>
#include <vector>

#include "stochlyap/model.hpp"

namespace stochlyap {

using ParameterMap = std::map<std::string, double>;

/// Built-in dynamics, looked up by name. Unknown names or parameters throw
/// std::invalid_argument.
///
///   multiplicative_1d  f = b u x,              sigma = sigma0 x
///   linear_1d          f = a x + b u,          sigma = s + m x
///   sine_1d            f = -x + sin x,         sigma = s
///   constant           f = c,                  sigma = s I      (dim = n)
///   multiplicative_2d  f = u x,                sigma = sigma0 diag(x)
///   correlated_2d      f = -k x + u,           sigma = s [[1, rho], [0, 1]]
///   rotation_2d        f = -c x + u (-x2, x1), sigma = sigma0 diag(x)
Dynamics make_dynamics(const std::string& name, const ParameterMap& params = {});

/// A reasonable default control sample for a catalog model.
ControlSet default_controls(const std::string& name, const ParameterMap& params = {});

std::vector<std::string> catalog_names();

}  // namespace stochlyap
