#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointfuse/errors.hpp"

namespace pointfuse::nn {

// Dense row-major n-d array of doubles. The whole engine runs in 64-bit
// precision so finite-difference gradient checks hold at 1e-4.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> values);

    static std::size_t count(const std::vector<int>& s);

    std::size_t size() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 2-d convenience accessors (row-major)
    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * dim(1) + j]; }

    void fill(double v);
    Tensor reshaped(std::vector<int> s) const; // same element count required

    std::string shape_str() const;
};

void require_shape(const Tensor& t, const std::vector<int>& shape, const std::string& where);

// A trainable tensor with an accumulated gradient of the same shape.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor(value.shape);
    }
    void zero_grad() { grad.fill(0.0); }
};

// C[M,N] (+)= A[M,K] * B[K,N], all row-major contiguous
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
// C[M,N] (+)= A^T * B with A stored [K,M]
void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
// C[M,N] (+)= A * B^T with B stored [N,K]
void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

} // namespace pointfuse::nn
