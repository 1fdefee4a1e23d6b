#include "transgap/nn.hpp"

#include <cmath>

namespace transgap {

ActivationSpec ActivationSpec::make(double q) {
    if (!(q > 1.0 && q <= 2.0)) usage_error("activation exponent q must lie in (1, 2]");
    ActivationSpec a;
    a.q = q;
    a.t = std::pow(1.0 / q, 1.0 / (q - 1.0));
    a.c = std::pow(1.0 / q, q / (q - 1.0));
    return a;
}

double ActivationSpec::eval(double x) const {
    if (x <= 0.0) return 0.0;
    if (x <= t) return q == 2.0 ? x * x : std::pow(x, q);
    return x - t + c;
}

double ActivationSpec::deriv(double x) const {
    if (x <= 0.0) return 0.0;
    if (x <= t) return q == 2.0 ? 2.0 * x : q * std::pow(x, q - 1.0);
    return 1.0;
}

double ActivationSpec::holder_constant(int d) const {
    return q * std::pow(static_cast<double>(d), (2.0 - q) / 2.0);
}

double act_eval(const ActivationSpec& a, double x) { return a.eval(x); }
double act_deriv(const ActivationSpec& a, double x) { return a.deriv(x); }

}  // namespace transgap
