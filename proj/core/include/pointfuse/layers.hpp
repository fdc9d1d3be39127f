#pragma once

#include <vector>

#include "pointfuse/rng.hpp"
#include "pointfuse/tensor.hpp"

namespace pointfuse::nn {

// Layers cache what their backward pass needs on forward(); backward()
// accumulates parameter gradients and returns the input gradient.
// Forward passes are pure given parameters and input.

void init_he_uniform(Tensor& t, int fan_in, Rng& rng);
void init_xavier_uniform(Tensor& t, int fan_in, int fan_out, Rng& rng);

// 2D cross-correlation (no kernel flip), stride 1.
class Conv2d {
public:
    Conv2d(std::string name, int in_channels, int out_channels, int ksize, int pad, Rng& rng);

    Tensor forward(const Tensor& x); // [b,ci,h,w] -> [b,co,oh,ow]
    Tensor backward(const Tensor& dy);
    std::vector<Param*> params() { return {&weights_, &bias_}; }

    int out_channels() const { return out_ch_; }
    int pad() const { return pad_; }
    const Tensor& weights() const { return weights_.value; }
    const Tensor& bias() const { return bias_.value; }

private:
    int in_ch_, out_ch_, k_, pad_;
    Param weights_; // [co, ci*k*k]
    Param bias_;    // [co]
    Tensor cols_;   // cached im2col, [b, ci*k*k, oh*ow]
    int b_ = 0, h_ = 0, w_ = 0, oh_ = 0, ow_ = 0;
};

class Dense {
public:
    enum class Init { he, xavier };
    Dense(std::string name, int in_features, int out_features, Init init, Rng& rng);

    Tensor forward(const Tensor& x); // [b,n] -> [b,m]
    Tensor backward(const Tensor& dy);
    std::vector<Param*> params() { return {&weights_, &bias_}; }

    const Tensor& weights() const { return weights_.value; }
    const Tensor& bias() const { return bias_.value; }

private:
    int in_, out_;
    Param weights_; // [n,m]
    Param bias_;    // [m]
    Tensor x_;
};

class Relu {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

private:
    Tensor x_;
};

// Single LSTM layer over a [b, steps, features] sequence; forward returns
// the full hidden sequence [b, steps, hidden] so layers can stack, plus
// final_hidden() for the head. Backward runs through time.
class Lstm {
public:
    Lstm(std::string name, int input_size, int hidden_size, Rng& rng);

    Tensor forward(const Tensor& x);                   // [b,f,in] -> [b,f,h]
    Tensor backward(const Tensor& dh_seq);             // [b,f,h] -> [b,f,in]
    Tensor final_hidden() const;                       // [b,h]
    Tensor backward_from_final(const Tensor& dh_last); // grad only at last step
    std::vector<Param*> params() { return {&wx_, &wh_, &bias_}; }

    int hidden_size() const { return hidden_; }
    const Tensor& wx() const { return wx_.value; }
    const Tensor& wh() const { return wh_.value; }
    const Tensor& bias_values() const { return bias_.value; }

private:
    int input_, hidden_;
    Param wx_;   // [4h, in], gate order (i, f, g, o)
    Param wh_;   // [4h, h]
    Param bias_; // [4h]
    Tensor x_;
    std::vector<Tensor> gates_; // per step, post-activation [b,4h]
    std::vector<Tensor> c_;     // per step incl. initial, [b,h]
    std::vector<Tensor> h_;     // per step incl. initial, [b,h]
    int b_ = 0, steps_ = 0;
};

struct LossValue {
    double value = 0.0;     // the metric itself (mean cos, or mean cross-entropy)
    double objective = 0.0; // what the optimizer minimizes
    Tensor grad;            // d objective / d predictions
};

// value = mean_i cos(theta_i) in [-1,1]; objective = 1 - value in [0,2].
LossValue cosine_loss(const Tensor& pred, const Tensor& target); // both [b,3]

// mean cross-entropy; grad is (softmax - onehot)/b
LossValue softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// row-wise softmax of [b,k]
Tensor softmax(const Tensor& logits);

// Cache-free forward paths for trained models: pure functions of the
// parameter tensors, safe to run concurrently.
Tensor conv2d_infer(const Tensor& x, const Tensor& weights, const Tensor& bias, int pad);
Tensor dense_infer(const Tensor& x, const Tensor& weights, const Tensor& bias);
void relu_inplace(Tensor& x);
Tensor lstm_infer(const Tensor& x, const Tensor& wx, const Tensor& wh, const Tensor& bias,
                  int hidden, bool return_sequence);

} // namespace pointfuse::nn
