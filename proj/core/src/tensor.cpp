#include "mtae/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mtae {

std::string shape_to_string(const std::vector<i64>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data_)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace mtae
