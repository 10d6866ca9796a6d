#pragma once

#include "ldgauss/common.hpp"

#include <vector>

namespace ldgauss {

// Spherical Gaussian mixture: components (w_j, mu_j, sigma_j) with
// sum w = 1, covariances sigma_j^2 I.
struct GmmComponent {
    double weight = 0.0;
    Vector mean;
    double sigma = 1.0;
};

struct GmmModel {
    std::vector<GmmComponent> components;

    int dim() const { return components.empty() ? 0 : static_cast<int>(components[0].mean.size()); }
    int k() const { return static_cast<int>(components.size()); }

    void validate() const {
        if (components.empty()) throw precondition_error("GmmModel: no components");
        double wsum = 0.0;
        for (const auto& c : components) {
            if (c.weight < 0.0) throw precondition_error("GmmModel: negative weight");
            if (!(c.sigma > 0.0)) throw precondition_error("GmmModel: sigma must be positive");
            if (c.mean.size() != components[0].mean.size())
                throw precondition_error("GmmModel: inconsistent dimensions");
            wsum += c.weight;
        }
        if (std::abs(wsum - 1.0) > 1e-9) throw precondition_error("GmmModel: weights must sum to 1");
    }
};

}  // namespace ldgauss
