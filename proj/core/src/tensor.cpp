#include "pointfuse/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace pointfuse::nn {

std::size_t Tensor::count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (const int d : s) {
        if (d < 0) throw ShapeError("negative dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != count(shape))
        throw ShapeError("value count does not match shape " + shape_str());
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

Tensor Tensor::reshaped(std::vector<int> s) const {
    if (count(s) != size()) throw ShapeError("reshape changes element count");
    Tensor out;
    out.shape = std::move(s);
    out.data = data;
    return out;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

void require_shape(const Tensor& t, const std::vector<int>& shape, const std::string& where) {
    if (t.shape != shape) {
        Tensor want;
        want.shape = shape;
        throw ShapeError(where + ": expected shape " + want.shape_str() + ", got "
                         + t.shape_str());
    }
}

// ikj loop order keeps B and C rows contiguous so the compiler can vectorize.
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0);
    for (int kk = 0; kk < k; ++kk) {
        const double* arow = a + static_cast<std::size_t>(kk) * m;
        const double* brow = b + static_cast<std::size_t>(kk) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * k;
            double sum = 0.0;
            for (int kk = 0; kk < k; ++kk) sum += arow[kk] * brow[kk];
            crow[j] = accumulate ? crow[j] + sum : sum;
        }
    }
}

} // namespace pointfuse::nn
