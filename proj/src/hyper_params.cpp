#include "adabayes/hyper_params.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace adabayes {

HyperParams HyperParams::defaults(std::size_t minibatch_size) {
    HyperParams hp;
    hp.minibatch_size = minibatch_size;
    hp.sigma2 = hp.eta_sgd / static_cast<double>(minibatch_size == 0 ? 1 : minibatch_size);
    hp.lambda = 5e-5;
    return hp;
}

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw std::invalid_argument("invalid hyperparameters: " + message);
    }
}

}  // namespace

void HyperParams::validate() const {
    require(std::isfinite(eta) && eta >= 0.0, "eta must be finite and >= 0, got " + std::to_string(eta));
    require(std::isfinite(eta_sgd) && eta_sgd > 0.0, "eta_sgd must be > 0, got " + std::to_string(eta_sgd));
    require(minibatch_size >= 1, "minibatch_size must be >= 1");
    require(std::isfinite(sigma2) && sigma2 > 0.0, "sigma2 must be finite and > 0, got " + std::to_string(sigma2));
    require(eta * eta / (2.0 * sigma2) < 1.0, "eta^2 / (2 sigma2) must be < 1 for a contractive drift");
    require(lambda >= 0.0 && lambda < 1.0, "lambda must lie in [0, 1), got " + std::to_string(lambda));
    require(std::isfinite(l2) && l2 >= 0.0, "l2 must be >= 0, got " + std::to_string(l2));
    require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1), got " + std::to_string(beta1));
    require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1), got " + std::to_string(beta2));
    require(std::isfinite(eps) && eps >= 0.0, "eps must be >= 0, got " + std::to_string(eps));
}

}  // namespace adabayes
