#pragma once

#include <cstdint>
#include <vector>

#include "pointfuse/tensor.hpp"

namespace pointfuse::ml {

// Polynomial kernel (gamma * x.y + coef0)^degree; degree 2 by default.
struct PolyKernel {
    int degree = 2;
    double gamma = 1.0;
    double coef0 = 1.0;

    double operator()(const double* a, const double* b, int p) const {
        double dot = 0.0;
        for (int i = 0; i < p; ++i) dot += a[i] * b[i];
        double base = gamma * dot + coef0;
        double out = 1.0;
        for (int d = 0; d < degree; ++d) out *= base;
        return out;
    }
};

struct SmoConfig {
    double C = 10.0;
    double tol = 1e-3; // stop when the max KKT violation falls below this
    std::int64_t max_iter = 20'000'000;
};

// epsilon-SVR trained by SMO on the doubled dual problem, one output.
class EpsilonSvr {
public:
    EpsilonSvr() = default;
    EpsilonSvr(PolyKernel kernel, double C, double epsilon, double tol);

    void fit(const nn::Tensor& x, const std::vector<double>& y); // x is [n,p]
    double predict(const double* x) const;

    std::size_t support_vector_count() const { return sv_.size() / static_cast<std::size_t>(p_); }

    // serialization access
    const std::vector<double>& sv_values() const { return sv_; }
    const std::vector<double>& sv_coeffs() const { return coeff_; }
    double rho() const { return rho_; }
    int feature_count() const { return p_; }
    const PolyKernel& kernel() const { return kernel_; }
    void restore(PolyKernel k, int p, std::vector<double> sv, std::vector<double> coeff,
                 double rho);

private:
    PolyKernel kernel_;
    double c_ = 10.0;
    double epsilon_ = 0.01;
    double tol_ = 1e-3;
    int p_ = 0;
    std::vector<double> sv_;    // [n_sv * p]
    std::vector<double> coeff_; // alpha - alpha*, per support vector
    double rho_ = 0.0;
};

// Binary C-SVC on +-1 labels, same SMO core; used one-vs-rest.
class BinarySvc {
public:
    BinarySvc() = default;
    BinarySvc(PolyKernel kernel, double C, double tol);

    void fit(const nn::Tensor& x, const std::vector<double>& y); // y in {-1,+1}
    double decision(const double* x) const;

    const std::vector<double>& sv_values() const { return sv_; }
    const std::vector<double>& sv_coeffs() const { return coeff_; }
    double rho() const { return rho_; }
    int feature_count() const { return p_; }
    void restore(PolyKernel k, int p, std::vector<double> sv, std::vector<double> coeff,
                 double rho);

private:
    PolyKernel kernel_;
    double c_ = 10.0;
    double tol_ = 1e-3;
    int p_ = 0;
    std::vector<double> sv_;
    std::vector<double> coeff_; // alpha_i * y_i
    double rho_ = 0.0;
};

} // namespace pointfuse::ml
