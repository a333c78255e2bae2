#include "detnas/tensor.hpp"

#include <algorithm>

#include "detnas/errors.hpp"

namespace detnas {

template <typename T>
TensorT<T>::TensorT(std::vector<int> dims) : dims_(std::move(dims)) {
    size_t n = 1;
    for (int d : dims_) {
        if (d <= 0) throw ShapeError("tensor dims must be positive, got " + shape_str());
        n *= static_cast<size_t>(d);
    }
    data_.assign(n, T(0));
}

template <typename T>
std::string TensorT<T>::shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < dims_.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims_[i]);
    }
    return s + ")";
}

template <typename T>
bool TensorT<T>::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template class TensorT<float>;
template class TensorT<double>;

}  // namespace detnas
