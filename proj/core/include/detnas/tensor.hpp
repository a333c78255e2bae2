#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace detnas {

// Dense row-major tensor. Rank is 2 (batch, features) or 4
// (batch, channels, height, width) in practice, but any rank is stored.
template <typename T>
class TensorT {
  public:
    TensorT() = default;
    explicit TensorT(std::vector<int> dims);

    static TensorT zeros(std::vector<int> dims) { return TensorT(std::move(dims)); }

    const std::vector<int>& dims() const { return dims_; }
    int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(dims_.size()); }
    size_t numel() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(T(0)); }

    bool same_shape(const TensorT& other) const { return dims_ == other.dims_; }
    std::string shape_str() const;
    bool all_finite() const;

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(dims_);
        for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

  private:
    std::vector<int> dims_;
    std::vector<T> data_;

    template <typename U>
    friend class TensorT;
};

using Tensor = TensorT<float>;

extern template class TensorT<float>;
extern template class TensorT<double>;

}  // namespace detnas
