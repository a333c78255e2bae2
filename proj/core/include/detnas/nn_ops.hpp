#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "detnas/tensor.hpp"

namespace detnas::nn {

// Convolution: x (N,Cin,H,W), w (Cout,Cin/groups,k,k), same-padding k/2,
// stride in {1,2}, groups in {1, Cin}. No bias (BN follows every conv).
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, int stride, int groups);

template <typename T>
void conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, int stride, int groups,
                     const TensorT<T>& gy, TensorT<T>& gx, TensorT<T>& gw);

// Training-mode batch norm over (N,H,W) per channel with full-batch
// statistics (biased variance). batch_mean/batch_var receive the moments;
// xhat_cache (when non-null) keeps the normalized input for backward.
template <typename T>
TensorT<T> batch_norm_train(const TensorT<T>& x, const TensorT<T>& scale, const TensorT<T>& shift,
                            T eps, TensorT<T>* xhat_cache, std::vector<T>& batch_mean,
                            std::vector<T>& batch_var);

template <typename T>
TensorT<T> batch_norm_eval(const TensorT<T>& x, const TensorT<T>& scale, const TensorT<T>& shift,
                           const TensorT<T>& running_mean, const TensorT<T>& running_var, T eps);

template <typename T>
void batch_norm_train_backward(const TensorT<T>& xhat, const std::vector<T>& batch_var,
                               const TensorT<T>& scale, T eps, const TensorT<T>& gy,
                               TensorT<T>& gx, TensorT<T>& gscale, TensorT<T>& gshift);

template <typename T>
TensorT<T> relu(const TensorT<T>& x);
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& gy);

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x);
// Takes the forward output y = sigmoid(x).
template <typename T>
TensorT<T> sigmoid_backward(const TensorT<T>& y, const TensorT<T>& gy);

// Splits (N,C,H,W) into two (N,C/2,H,W) halves; C must be even.
template <typename T>
std::pair<TensorT<T>, TensorT<T>> channel_split(const TensorT<T>& x);

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b);

// Transpose of the (groups, C/groups) channel view; data-independent
// permutation. The inverse is channel_shuffle with groups' = C/groups.
template <typename T>
TensorT<T> channel_shuffle(const TensorT<T>& x, int groups);

struct MaxPoolCache {
    std::vector<int> in_dims;
    std::vector<size_t> argmax;  // flat input index per output element
};

// Same-padding max pool (pad = kernel/2); padded cells never win. Ties go
// to the first index in scan order.
template <typename T>
TensorT<T> max_pool(const TensorT<T>& x, int kernel, int stride, MaxPoolCache* cache);

template <typename T>
TensorT<T> max_pool_backward(const MaxPoolCache& cache, const TensorT<T>& gy);

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x);
template <typename T>
TensorT<T> global_avg_pool_backward(const std::vector<int>& in_dims, const TensorT<T>& gy);

// x (N,F), w (O,F), b (O) -> (N,O).
template <typename T>
TensorT<T> fully_connected(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b);

template <typename T>
void fully_connected_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy,
                              TensorT<T>& gx, TensorT<T>& gw, TensorT<T>& gb);

// Mean over the batch of -log p[label]; probs (when non-null) receives the
// softmax for backward. Uniform logits over k classes give ln k.
template <typename T>
T softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels,
                        TensorT<T>* probs);

template <typename T>
TensorT<T> softmax_cross_entropy_backward(const TensorT<T>& probs, const std::vector<int>& labels);

// Huber penalty with threshold 1, summed over coordinates, mean over the
// batch: |d| <= 1 -> d^2/2, else |d| - 1/2.
template <typename T>
T smooth_l1(const TensorT<T>& pred, const TensorT<T>& target);

template <typename T>
TensorT<T> smooth_l1_backward(const TensorT<T>& pred, const TensorT<T>& target);

}  // namespace detnas::nn
