#include "pointfuse/layers.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace pointfuse::nn {

void init_he_uniform(Tensor& t, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& v : t.data) v = rng.uniform(-bound, bound);
}

void init_xavier_uniform(Tensor& t, int fan_in, int fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
}

// --- Conv2d ----------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int ksize, int pad, Rng& rng)
    : in_ch_(in_channels), out_ch_(out_channels), k_(ksize), pad_(pad),
      weights_(name + ".w", Tensor({out_channels, in_channels * ksize * ksize})),
      bias_(name + ".b", Tensor({out_channels})) {
    init_he_uniform(weights_.value, in_channels * ksize * ksize, rng);
    bias_.value.fill(0.01); // keeps ReLU units alive on sparse masked inputs
}

namespace {

// cols [ck, L] for one image [ci, h, w]; L = oh*ow
void im2col(const double* img, int ci, int h, int w, int k, int pad, int oh, int ow,
            double* cols) {
    const int L = oh * ow;
    int row = 0;
    for (int c = 0; c < ci; ++c) {
        const double* plane = img + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++row) {
                double* dst = cols + static_cast<std::size_t>(row) * L;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy + ky - pad;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox + kx - pad;
                        dst[oy * ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                                ? plane[iy * w + ix]
                                                : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, int ci, int h, int w, int k, int pad, int oh, int ow,
                double* img) {
    const int L = oh * ow;
    int row = 0;
    for (int c = 0; c < ci; ++c) {
        double* plane = img + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++row) {
                const double* src = cols + static_cast<std::size_t>(row) * L;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox + kx - pad;
                        if (ix >= 0 && ix < w) plane[iy * w + ix] += src[oy * ow + ox];
                    }
                }
            }
        }
    }
}

} // namespace

Tensor Conv2d::forward(const Tensor& x) {
    if (x.rank() != 4 || x.dim(1) != in_ch_)
        throw ShapeError("conv2d: expected [b," + std::to_string(in_ch_) + ",h,w], got "
                         + x.shape_str());
    b_ = x.dim(0);
    h_ = x.dim(2);
    w_ = x.dim(3);
    oh_ = h_ + 2 * pad_ - k_ + 1;
    ow_ = w_ + 2 * pad_ - k_ + 1;
    if (oh_ <= 0 || ow_ <= 0) throw ShapeError("conv2d: kernel larger than padded input");

    const int ck = in_ch_ * k_ * k_;
    const int L = oh_ * ow_;
    cols_ = Tensor({b_, ck, L});
    Tensor y({b_, out_ch_, oh_, ow_});
    for (int i = 0; i < b_; ++i) {
        double* cols = cols_.ptr() + static_cast<std::size_t>(i) * ck * L;
        im2col(x.ptr() + static_cast<std::size_t>(i) * in_ch_ * h_ * w_, in_ch_, h_, w_, k_,
               pad_, oh_, ow_, cols);
        double* out = y.ptr() + static_cast<std::size_t>(i) * out_ch_ * L;
        gemm_nn(out_ch_, L, ck, weights_.value.ptr(), cols, out, false);
        for (int c = 0; c < out_ch_; ++c) {
            const double b = bias_.value[static_cast<std::size_t>(c)];
            double* row = out + static_cast<std::size_t>(c) * L;
            for (int j = 0; j < L; ++j) row[j] += b;
        }
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    require_shape(dy, {b_, out_ch_, oh_, ow_}, "conv2d backward");
    const int ck = in_ch_ * k_ * k_;
    const int L = oh_ * ow_;
    Tensor dx({b_, in_ch_, h_, w_});
    Tensor dcols({ck, L});
    for (int i = 0; i < b_; ++i) {
        const double* dout = dy.ptr() + static_cast<std::size_t>(i) * out_ch_ * L;
        const double* cols = cols_.ptr() + static_cast<std::size_t>(i) * ck * L;
        // dW += dY * colsT ; dcols = WT * dY
        gemm_nt(out_ch_, ck, L, dout, cols, weights_.grad.ptr(), true);
        gemm_tn(ck, L, out_ch_, weights_.value.ptr(), dout, dcols.ptr(), false);
        col2im_add(dcols.ptr(), in_ch_, h_, w_, k_, pad_, oh_, ow_,
                   dx.ptr() + static_cast<std::size_t>(i) * in_ch_ * h_ * w_);
        for (int c = 0; c < out_ch_; ++c) {
            const double* row = dout + static_cast<std::size_t>(c) * L;
            double sum = 0.0;
            for (int j = 0; j < L; ++j) sum += row[j];
            bias_.grad[static_cast<std::size_t>(c)] += sum;
        }
    }
    return dx;
}

// --- Dense -----------------------------------------------------------------

Dense::Dense(std::string name, int in_features, int out_features, Init init, Rng& rng)
    : in_(in_features), out_(out_features),
      weights_(name + ".w", Tensor({in_features, out_features})),
      bias_(name + ".b", Tensor({out_features})) {
    if (init == Init::he) {
        init_he_uniform(weights_.value, in_features, rng);
        bias_.value.fill(0.01);
    } else {
        init_xavier_uniform(weights_.value, in_features, out_features, rng);
    }
}

Tensor Dense::forward(const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != in_)
        throw ShapeError("dense: expected [b," + std::to_string(in_) + "], got " + x.shape_str());
    x_ = x;
    const int b = x.dim(0);
    Tensor y({b, out_});
    gemm_nn(b, out_, in_, x.ptr(), weights_.value.ptr(), y.ptr(), false);
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < out_; ++j) y.at(i, j) += bias_.value[static_cast<std::size_t>(j)];
    return y;
}

Tensor Dense::backward(const Tensor& dy) {
    const int b = x_.dim(0);
    require_shape(dy, {b, out_}, "dense backward");
    gemm_tn(in_, out_, b, x_.ptr(), dy.ptr(), weights_.grad.ptr(), true);
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < out_; ++j) bias_.grad[static_cast<std::size_t>(j)] += dy.at(i, j);
    Tensor dx({b, in_});
    gemm_nt(b, in_, out_, dy.ptr(), weights_.value.ptr(), dx.ptr(), false);
    return dx;
}

// --- Relu ------------------------------------------------------------------

Tensor Relu::forward(const Tensor& x) {
    x_ = x;
    Tensor y = x;
    for (double& v : y.data)
        if (v < 0.0) v = 0.0;
    return y;
}

Tensor Relu::backward(const Tensor& dy) {
    require_shape(dy, x_.shape, "relu backward");
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (x_[i] <= 0.0) dx[i] = 0.0;
    return dx;
}

// --- Lstm ------------------------------------------------------------------

namespace {
double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
} // namespace

Lstm::Lstm(std::string name, int input_size, int hidden_size, Rng& rng)
    : input_(input_size), hidden_(hidden_size),
      wx_(name + ".wx", Tensor({4 * hidden_size, input_size})),
      wh_(name + ".wh", Tensor({4 * hidden_size, hidden_size})),
      bias_(name + ".b", Tensor({4 * hidden_size})) {
    init_xavier_uniform(wx_.value, input_size, hidden_size, rng);
    init_xavier_uniform(wh_.value, hidden_size, hidden_size, rng);
}

Tensor Lstm::forward(const Tensor& x) {
    if (x.rank() != 3 || x.dim(2) != input_)
        throw ShapeError("lstm: expected [b,f," + std::to_string(input_) + "], got "
                         + x.shape_str());
    x_ = x;
    b_ = x.dim(0);
    steps_ = x.dim(1);
    if (steps_ < 1) throw ShapeError("lstm: empty sequence");
    const int h = hidden_;

    gates_.assign(static_cast<std::size_t>(steps_), Tensor({b_, 4 * h}));
    c_.assign(static_cast<std::size_t>(steps_) + 1, Tensor({b_, h}));
    h_.assign(static_cast<std::size_t>(steps_) + 1, Tensor({b_, h}));

    Tensor hseq({b_, steps_, h});
    Tensor z({b_, 4 * h});
    for (int t = 0; t < steps_; ++t) {
        // z = x_t WxT + h_{t-1} WhT + bias
        const double* xt = x.ptr() + static_cast<std::size_t>(t) * input_;
        // x is [b, f, in]; gather step t rows (stride f*in per batch row)
        Tensor xstep({b_, input_});
        for (int i = 0; i < b_; ++i)
            for (int j = 0; j < input_; ++j)
                xstep.at(i, j) = xt[static_cast<std::size_t>(i) * steps_ * input_ + j];
        gemm_nt(b_, 4 * h, input_, xstep.ptr(), wx_.value.ptr(), z.ptr(), false);
        gemm_nt(b_, 4 * h, h, h_[static_cast<std::size_t>(t)].ptr(), wh_.value.ptr(), z.ptr(),
                true);

        Tensor& gate = gates_[static_cast<std::size_t>(t)];
        Tensor& c_prev = c_[static_cast<std::size_t>(t)];
        Tensor& c_new = c_[static_cast<std::size_t>(t) + 1];
        Tensor& h_new = h_[static_cast<std::size_t>(t) + 1];
        for (int i = 0; i < b_; ++i) {
            for (int j = 0; j < h; ++j) {
                const double zi = z.at(i, j) + bias_.value[static_cast<std::size_t>(j)];
                const double zf = z.at(i, h + j) + bias_.value[static_cast<std::size_t>(h + j)];
                const double zg =
                    z.at(i, 2 * h + j) + bias_.value[static_cast<std::size_t>(2 * h + j)];
                const double zo =
                    z.at(i, 3 * h + j) + bias_.value[static_cast<std::size_t>(3 * h + j)];
                const double gi = sigmoid(zi);
                const double gf = sigmoid(zf);
                const double gg = std::tanh(zg);
                const double go = sigmoid(zo);
                gate.at(i, j) = gi;
                gate.at(i, h + j) = gf;
                gate.at(i, 2 * h + j) = gg;
                gate.at(i, 3 * h + j) = go;
                const double cv = gf * c_prev.at(i, j) + gi * gg;
                c_new.at(i, j) = cv;
                const double hv = go * std::tanh(cv);
                h_new.at(i, j) = hv;
                hseq.data[(static_cast<std::size_t>(i) * steps_ + t) * h + j] = hv;
            }
        }
    }
    return hseq;
}

Tensor Lstm::final_hidden() const { return h_.back(); }

Tensor Lstm::backward_from_final(const Tensor& dh_last) {
    require_shape(dh_last, {b_, hidden_}, "lstm backward_from_final");
    Tensor dh_seq({b_, steps_, hidden_});
    for (int i = 0; i < b_; ++i)
        for (int j = 0; j < hidden_; ++j)
            dh_seq.data[(static_cast<std::size_t>(i) * steps_ + steps_ - 1) * hidden_ + j] =
                dh_last.at(i, j);
    return backward(dh_seq);
}

Tensor Lstm::backward(const Tensor& dh_seq) {
    require_shape(dh_seq, {b_, steps_, hidden_}, "lstm backward");
    const int h = hidden_;
    Tensor dx({b_, steps_, input_});
    Tensor dh({b_, h});
    Tensor dc({b_, h});
    Tensor dz({b_, 4 * h});
    Tensor xstep({b_, input_});
    Tensor dxstep({b_, input_});

    for (int t = steps_ - 1; t >= 0; --t) {
        const Tensor& gate = gates_[static_cast<std::size_t>(t)];
        const Tensor& c_prev = c_[static_cast<std::size_t>(t)];
        const Tensor& c_new = c_[static_cast<std::size_t>(t) + 1];

        for (int i = 0; i < b_; ++i) {
            for (int j = 0; j < h; ++j) {
                const double upstream =
                    dh.at(i, j)
                    + dh_seq.data[(static_cast<std::size_t>(i) * steps_ + t) * h + j];
                const double gi = gate.at(i, j);
                const double gf = gate.at(i, h + j);
                const double gg = gate.at(i, 2 * h + j);
                const double go = gate.at(i, 3 * h + j);
                const double tc = std::tanh(c_new.at(i, j));

                const double dcv = dc.at(i, j) + upstream * go * (1.0 - tc * tc);
                dz.at(i, j) = dcv * gg * gi * (1.0 - gi);                  // input gate
                dz.at(i, h + j) = dcv * c_prev.at(i, j) * gf * (1.0 - gf); // forget gate
                dz.at(i, 2 * h + j) = dcv * gi * (1.0 - gg * gg);          // candidate
                dz.at(i, 3 * h + j) = upstream * tc * go * (1.0 - go);     // output gate
                dc.at(i, j) = dcv * gf;
            }
        }

        for (int i = 0; i < b_; ++i)
            for (int j = 0; j < input_; ++j)
                xstep.at(i, j) =
                    x_.data[(static_cast<std::size_t>(i) * steps_ + t) * input_ + j];

        // dWx += dzT x_t ; dWh += dzT h_{t-1} ; db += colsum(dz)
        gemm_tn(4 * h, input_, b_, dz.ptr(), xstep.ptr(), wx_.grad.ptr(), true);
        gemm_tn(4 * h, h, b_, dz.ptr(), h_[static_cast<std::size_t>(t)].ptr(), wh_.grad.ptr(),
                true);
        for (int i = 0; i < b_; ++i)
            for (int j = 0; j < 4 * h; ++j)
                bias_.grad[static_cast<std::size_t>(j)] += dz.at(i, j);

        gemm_nn(b_, input_, 4 * h, dz.ptr(), wx_.value.ptr(), dxstep.ptr(), false);
        for (int i = 0; i < b_; ++i)
            for (int j = 0; j < input_; ++j)
                dx.data[(static_cast<std::size_t>(i) * steps_ + t) * input_ + j] =
                    dxstep.at(i, j);
        gemm_nn(b_, h, 4 * h, dz.ptr(), wh_.value.ptr(), dh.ptr(), false);
    }
    return dx;
}

// --- losses ----------------------------------------------------------------

LossValue cosine_loss(const Tensor& pred, const Tensor& target) {
    if (pred.rank() != 2 || pred.dim(1) != 3)
        throw ShapeError("cosine_loss: expected [b,3], got " + pred.shape_str());
    require_shape(target, pred.shape, "cosine_loss target");
    const int b = pred.dim(0);
    if (b == 0) throw ShapeError("cosine_loss: empty batch");

    LossValue out;
    out.grad = Tensor(pred.shape);
    double sum_cos = 0.0;
    for (int i = 0; i < b; ++i) {
        const double px = pred.at(i, 0), py = pred.at(i, 1), pz = pred.at(i, 2);
        const double tx = target.at(i, 0), ty = target.at(i, 1), tz = target.at(i, 2);
        const double np = std::sqrt(px * px + py * py + pz * pz);
        const double nt = std::sqrt(tx * tx + ty * ty + tz * tz);
        if (np <= 1e-12 || nt <= 1e-12)
            throw ZeroVectorError("cosine_loss row " + std::to_string(i));
        const double inv = 1.0 / (np * nt);
        const double cos =
            std::clamp((px * tx + py * ty + pz * tz) * inv, -1.0, 1.0);
        sum_cos += cos;
        // d(1 - mean cos)/dp = -(t/(|p||t|) - cos * p/|p|^2) / b
        const double s = -1.0 / b;
        out.grad.at(i, 0) = s * (tx * inv - cos * px / (np * np));
        out.grad.at(i, 1) = s * (ty * inv - cos * py / (np * np));
        out.grad.at(i, 2) = s * (tz * inv - cos * pz / (np * np));
    }
    out.value = sum_cos / b;
    out.objective = 1.0 - out.value;
    return out;
}

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 2) throw ShapeError("softmax: expected [b,k]");
    const int b = logits.dim(0), k = logits.dim(1);
    Tensor p({b, k});
    for (int i = 0; i < b; ++i) {
        double mx = logits.at(i, 0);
        for (int j = 1; j < k; ++j) mx = std::max(mx, logits.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
            const double e = std::exp(logits.at(i, j) - mx);
            p.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < k; ++j) p.at(i, j) /= sum;
    }
    return p;
}

// --- inference-only paths ----------------------------------------------------

Tensor conv2d_infer(const Tensor& x, const Tensor& weights, const Tensor& bias, int pad) {
    const int b = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int co = weights.dim(0);
    const int ck = weights.dim(1);
    const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(ck / ci))));
    if (k * k * ci != ck) throw ShapeError("conv2d_infer: kernel shape mismatch");
    const int oh = h + 2 * pad - k + 1;
    const int ow = w + 2 * pad - k + 1;
    const int L = oh * ow;

    Tensor cols({ck, L});
    Tensor y({b, co, oh, ow});
    for (int i = 0; i < b; ++i) {
        im2col(x.ptr() + static_cast<std::size_t>(i) * ci * h * w, ci, h, w, k, pad, oh, ow,
               cols.ptr());
        double* out = y.ptr() + static_cast<std::size_t>(i) * co * L;
        gemm_nn(co, L, ck, weights.ptr(), cols.ptr(), out, false);
        for (int c = 0; c < co; ++c) {
            const double bv = bias[static_cast<std::size_t>(c)];
            double* row = out + static_cast<std::size_t>(c) * L;
            for (int j = 0; j < L; ++j) row[j] += bv;
        }
    }
    return y;
}

Tensor dense_infer(const Tensor& x, const Tensor& weights, const Tensor& bias) {
    const int b = x.dim(0), n = x.dim(1), m = weights.dim(1);
    if (weights.dim(0) != n) throw ShapeError("dense_infer: weight shape mismatch");
    Tensor y({b, m});
    gemm_nn(b, m, n, x.ptr(), weights.ptr(), y.ptr(), false);
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < m; ++j) y.at(i, j) += bias[static_cast<std::size_t>(j)];
    return y;
}

void relu_inplace(Tensor& x) {
    for (double& v : x.data)
        if (v < 0.0) v = 0.0;
}

Tensor lstm_infer(const Tensor& x, const Tensor& wx, const Tensor& wh, const Tensor& bias,
                  int hidden, bool return_sequence) {
    const int b = x.dim(0), steps = x.dim(1), in = x.dim(2);
    const int h = hidden;
    Tensor hcur({b, h}), ccur({b, h}), z({b, 4 * h}), xstep({b, in});
    Tensor hseq = return_sequence ? Tensor({b, steps, h}) : Tensor();
    for (int t = 0; t < steps; ++t) {
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < in; ++j)
                xstep.at(i, j) = x.data[(static_cast<std::size_t>(i) * steps + t) * in + j];
        gemm_nt(b, 4 * h, in, xstep.ptr(), wx.ptr(), z.ptr(), false);
        gemm_nt(b, 4 * h, h, hcur.ptr(), wh.ptr(), z.ptr(), true);
        for (int i = 0; i < b; ++i) {
            for (int j = 0; j < h; ++j) {
                const double gi = sigmoid(z.at(i, j) + bias[static_cast<std::size_t>(j)]);
                const double gf =
                    sigmoid(z.at(i, h + j) + bias[static_cast<std::size_t>(h + j)]);
                const double gg =
                    std::tanh(z.at(i, 2 * h + j) + bias[static_cast<std::size_t>(2 * h + j)]);
                const double go =
                    sigmoid(z.at(i, 3 * h + j) + bias[static_cast<std::size_t>(3 * h + j)]);
                const double cv = gf * ccur.at(i, j) + gi * gg;
                ccur.at(i, j) = cv;
                hcur.at(i, j) = go * std::tanh(cv);
                if (return_sequence)
                    hseq.data[(static_cast<std::size_t>(i) * steps + t) * h + j] =
                        hcur.at(i, j);
            }
        }
    }
    return return_sequence ? hseq : hcur;
}

LossValue softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2 || logits.dim(1) < 2)
        throw ShapeError("softmax_cross_entropy: expected [b,k], k >= 2");
    const int b = logits.dim(0), k = logits.dim(1);
    if (static_cast<int>(labels.size()) != b)
        throw ShapeError("softmax_cross_entropy: label count mismatch");
    for (const int l : labels)
        if (l < 0 || l >= k)
            throw DomainError("label " + std::to_string(l) + " out of range [0,"
                              + std::to_string(k) + ")");

    LossValue out;
    Tensor p = softmax(logits);
    out.grad = Tensor(logits.shape);
    double sum = 0.0;
    for (int i = 0; i < b; ++i) {
        const int l = labels[static_cast<std::size_t>(i)];
        sum += -std::log(std::max(p.at(i, l), 1e-300));
        for (int j = 0; j < k; ++j)
            out.grad.at(i, j) = (p.at(i, j) - (j == l ? 1.0 : 0.0)) / b;
    }
    out.value = sum / b;
    out.objective = out.value;
    return out;
}

} // namespace pointfuse::nn
