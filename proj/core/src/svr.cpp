#include "pointfuse/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pointfuse/errors.hpp"

namespace pointfuse::ml {

namespace {

constexpr double kTau = 1e-12;

// SMO with second-order working-set selection and a full kernel cache.
// Solves min 1/2 a^T Q a + p^T a, 0 <= a <= C, y^T a = 0, where
// Q(i,j) = y_i y_j K(i,j).
struct SmoSolver {
    int n = 0;
    const std::vector<double>& kmat; // row-major n_k x n_k base kernel
    int n_k;                          // kernel index = variable index % n_k
    std::vector<double> p;
    std::vector<signed char> y;
    double C;
    double tol;
    std::int64_t max_iter;

    std::vector<double> alpha;
    std::vector<double> grad;
    double rho = 0.0;

    SmoSolver(int n_, const std::vector<double>& k, int nk, std::vector<double> p_,
              std::vector<signed char> y_, double c, double tol_, std::int64_t max_iter_)
        : n(n_), kmat(k), n_k(nk), p(std::move(p_)), y(std::move(y_)), C(c), tol(tol_),
          max_iter(max_iter_) {}

    double q(int i, int j) const {
        return y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)]
               * kmat[static_cast<std::size_t>(i % n_k) * n_k + (j % n_k)];
    }

    void solve() {
        alpha.assign(static_cast<std::size_t>(n), 0.0);
        grad = p;

        for (std::int64_t it = 0; it < max_iter; ++it) {
            // i: most violating in I_up
            double gmax = -std::numeric_limits<double>::infinity();
            int i = -1;
            for (int t = 0; t < n; ++t) {
                const bool up = (y[static_cast<std::size_t>(t)] > 0 && alpha[static_cast<std::size_t>(t)] < C)
                                || (y[static_cast<std::size_t>(t)] < 0 && alpha[static_cast<std::size_t>(t)] > 0);
                if (!up) continue;
                const double v = -y[static_cast<std::size_t>(t)] * grad[static_cast<std::size_t>(t)];
                if (v > gmax) {
                    gmax = v;
                    i = t;
                }
            }
            if (i < 0) break;

            // j: second-order gain among I_low with violation against i
            double gmax2 = -std::numeric_limits<double>::infinity();
            double best_obj = -std::numeric_limits<double>::infinity();
            int j = -1;
            const double qii = q(i, i);
            for (int t = 0; t < n; ++t) {
                const bool low = (y[static_cast<std::size_t>(t)] > 0 && alpha[static_cast<std::size_t>(t)] > 0)
                                 || (y[static_cast<std::size_t>(t)] < 0 && alpha[static_cast<std::size_t>(t)] < C);
                if (!low) continue;
                const double v = y[static_cast<std::size_t>(t)] * grad[static_cast<std::size_t>(t)];
                if (v > gmax2) gmax2 = v;
                const double diff = gmax + v;
                if (diff <= 0) continue;
                // q carries the sign factors, so this is K_ii + K_tt - 2 K_it
                double quad = qii + q(t, t)
                              - 2.0 * q(i, t) * y[static_cast<std::size_t>(i)]
                                    * y[static_cast<std::size_t>(t)];
                if (quad <= 0) quad = kTau;
                const double obj = diff * diff / quad;
                if (obj > best_obj) {
                    best_obj = obj;
                    j = t;
                }
            }
            if (gmax + gmax2 < tol || j < 0) break;

            // two-variable update with box clipping
            const double old_ai = alpha[static_cast<std::size_t>(i)];
            const double old_aj = alpha[static_cast<std::size_t>(j)];
            if (y[static_cast<std::size_t>(i)] != y[static_cast<std::size_t>(j)]) {
                double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
                if (quad <= 0) quad = kTau;
                const double delta =
                    (-grad[static_cast<std::size_t>(i)] - grad[static_cast<std::size_t>(j)]) / quad;
                const double diff = old_ai - old_aj;
                alpha[static_cast<std::size_t>(i)] += delta;
                alpha[static_cast<std::size_t>(j)] += delta;
                if (diff > 0) {
                    if (alpha[static_cast<std::size_t>(j)] < 0) {
                        alpha[static_cast<std::size_t>(j)] = 0;
                        alpha[static_cast<std::size_t>(i)] = diff;
                    }
                } else {
                    if (alpha[static_cast<std::size_t>(i)] < 0) {
                        alpha[static_cast<std::size_t>(i)] = 0;
                        alpha[static_cast<std::size_t>(j)] = -diff;
                    }
                }
                if (diff > 0) {
                    if (alpha[static_cast<std::size_t>(i)] > C) {
                        alpha[static_cast<std::size_t>(i)] = C;
                        alpha[static_cast<std::size_t>(j)] = C - diff;
                    }
                } else {
                    if (alpha[static_cast<std::size_t>(j)] > C) {
                        alpha[static_cast<std::size_t>(j)] = C;
                        alpha[static_cast<std::size_t>(i)] = C + diff;
                    }
                }
            } else {
                double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
                if (quad <= 0) quad = kTau;
                const double delta =
                    (grad[static_cast<std::size_t>(i)] - grad[static_cast<std::size_t>(j)]) / quad;
                const double sum = old_ai + old_aj;
                alpha[static_cast<std::size_t>(i)] -= delta;
                alpha[static_cast<std::size_t>(j)] += delta;
                if (sum > C) {
                    if (alpha[static_cast<std::size_t>(i)] > C) {
                        alpha[static_cast<std::size_t>(i)] = C;
                        alpha[static_cast<std::size_t>(j)] = sum - C;
                    }
                } else {
                    if (alpha[static_cast<std::size_t>(j)] < 0) {
                        alpha[static_cast<std::size_t>(j)] = 0;
                        alpha[static_cast<std::size_t>(i)] = sum;
                    }
                }
                if (sum > C) {
                    if (alpha[static_cast<std::size_t>(j)] > C) {
                        alpha[static_cast<std::size_t>(j)] = C;
                        alpha[static_cast<std::size_t>(i)] = sum - C;
                    }
                } else {
                    if (alpha[static_cast<std::size_t>(i)] < 0) {
                        alpha[static_cast<std::size_t>(i)] = 0;
                        alpha[static_cast<std::size_t>(j)] = sum;
                    }
                }
            }

            const double dai = alpha[static_cast<std::size_t>(i)] - old_ai;
            const double daj = alpha[static_cast<std::size_t>(j)] - old_aj;
            if (dai == 0.0 && daj == 0.0) break;
            for (int t = 0; t < n; ++t)
                grad[static_cast<std::size_t>(t)] += q(t, i) * dai + q(t, j) * daj;
        }

        compute_rho();
    }

    void compute_rho() {
        double ub = std::numeric_limits<double>::infinity();
        double lb = -std::numeric_limits<double>::infinity();
        double sum_free = 0.0;
        int nr_free = 0;
        for (int t = 0; t < n; ++t) {
            const double yg = y[static_cast<std::size_t>(t)] * grad[static_cast<std::size_t>(t)];
            if (alpha[static_cast<std::size_t>(t)] >= C) {
                if (y[static_cast<std::size_t>(t)] < 0) ub = std::min(ub, yg);
                else lb = std::max(lb, yg);
            } else if (alpha[static_cast<std::size_t>(t)] <= 0) {
                if (y[static_cast<std::size_t>(t)] > 0) ub = std::min(ub, yg);
                else lb = std::max(lb, yg);
            } else {
                ++nr_free;
                sum_free += yg;
            }
        }
        rho = nr_free > 0 ? sum_free / nr_free : (ub + lb) / 2.0;
    }
};

std::vector<double> compute_kernel_matrix(const nn::Tensor& x, const PolyKernel& kernel) {
    const int n = x.dim(0);
    const int p = x.dim(1);
    std::vector<double> k(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        const double* xi = x.ptr() + static_cast<std::size_t>(i) * p;
        for (int j = 0; j <= i; ++j) {
            const double v = kernel(xi, x.ptr() + static_cast<std::size_t>(j) * p, p);
            k[static_cast<std::size_t>(i) * n + j] = v;
            k[static_cast<std::size_t>(j) * n + i] = v;
        }
    }
    return k;
}

} // namespace

EpsilonSvr::EpsilonSvr(PolyKernel kernel, double C, double epsilon, double tol)
    : kernel_(kernel), c_(C), epsilon_(epsilon), tol_(tol) {}

void EpsilonSvr::fit(const nn::Tensor& x, const std::vector<double>& y) {
    if (x.rank() != 2) throw ShapeError("svr fit: expected [n,p]");
    const int n = x.dim(0);
    p_ = x.dim(1);
    if (n == 0) throw ShapeError("svr fit: empty training set");
    if (static_cast<int>(y.size()) != n) throw ShapeError("svr fit: target count mismatch");

    const std::vector<double> kmat = compute_kernel_matrix(x, kernel_);

    // doubled problem: first n variables push up, last n push down
    std::vector<double> p(static_cast<std::size_t>(2 * n));
    std::vector<signed char> sign(static_cast<std::size_t>(2 * n));
    for (int i = 0; i < n; ++i) {
        p[static_cast<std::size_t>(i)] = epsilon_ - y[static_cast<std::size_t>(i)];
        sign[static_cast<std::size_t>(i)] = 1;
        p[static_cast<std::size_t>(i + n)] = epsilon_ + y[static_cast<std::size_t>(i)];
        sign[static_cast<std::size_t>(i + n)] = -1;
    }

    SmoSolver solver(2 * n, kmat, n, std::move(p), std::move(sign), c_, tol_,
                     SmoConfig{}.max_iter);
    solver.solve();
    rho_ = solver.rho;

    sv_.clear();
    coeff_.clear();
    for (int i = 0; i < n; ++i) {
        const double a = solver.alpha[static_cast<std::size_t>(i)]
                         - solver.alpha[static_cast<std::size_t>(i + n)];
        if (a == 0.0) continue;
        coeff_.push_back(a);
        const double* xi = x.ptr() + static_cast<std::size_t>(i) * p_;
        sv_.insert(sv_.end(), xi, xi + p_);
    }
}

double EpsilonSvr::predict(const double* x) const {
    double sum = -rho_;
    for (std::size_t s = 0; s < coeff_.size(); ++s)
        sum += coeff_[s] * kernel_(sv_.data() + s * static_cast<std::size_t>(p_), x, p_);
    return sum;
}

void EpsilonSvr::restore(PolyKernel k, int p, std::vector<double> sv, std::vector<double> coeff,
                         double rho) {
    kernel_ = k;
    p_ = p;
    sv_ = std::move(sv);
    coeff_ = std::move(coeff);
    rho_ = rho;
}

BinarySvc::BinarySvc(PolyKernel kernel, double C, double tol)
    : kernel_(kernel), c_(C), tol_(tol) {}

void BinarySvc::fit(const nn::Tensor& x, const std::vector<double>& y) {
    if (x.rank() != 2) throw ShapeError("svc fit: expected [n,p]");
    const int n = x.dim(0);
    p_ = x.dim(1);
    if (static_cast<int>(y.size()) != n) throw ShapeError("svc fit: label count mismatch");

    const std::vector<double> kmat = compute_kernel_matrix(x, kernel_);
    std::vector<double> p(static_cast<std::size_t>(n), -1.0);
    std::vector<signed char> sign(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (y[static_cast<std::size_t>(i)] != 1.0 && y[static_cast<std::size_t>(i)] != -1.0)
            throw DomainError("svc labels must be +-1");
        sign[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] > 0 ? 1 : -1;
    }

    SmoSolver solver(n, kmat, n, std::move(p), std::move(sign), c_, tol_, SmoConfig{}.max_iter);
    solver.solve();
    rho_ = solver.rho;

    sv_.clear();
    coeff_.clear();
    for (int i = 0; i < n; ++i) {
        const double a = solver.alpha[static_cast<std::size_t>(i)];
        if (a == 0.0) continue;
        coeff_.push_back(a * (y[static_cast<std::size_t>(i)] > 0 ? 1.0 : -1.0));
        const double* xi = x.ptr() + static_cast<std::size_t>(i) * p_;
        sv_.insert(sv_.end(), xi, xi + p_);
    }
}

double BinarySvc::decision(const double* x) const {
    double sum = -rho_;
    for (std::size_t s = 0; s < coeff_.size(); ++s)
        sum += coeff_[s] * kernel_(sv_.data() + s * static_cast<std::size_t>(p_), x, p_);
    return sum;
}

void BinarySvc::restore(PolyKernel k, int p, std::vector<double> sv, std::vector<double> coeff,
                        double rho) {
    kernel_ = k;
    p_ = p;
    sv_ = std::move(sv);
    coeff_ = std::move(coeff);
    rho_ = rho;
}

} // namespace pointfuse::ml
