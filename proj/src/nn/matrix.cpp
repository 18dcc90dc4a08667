#include "metroplan/nn/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "metroplan/error.hpp"

namespace metroplan::nn {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_)
    throw InvalidArgument("Matrix: " + std::to_string(data_.size()) + " values for shape " + shape());
}

std::string Matrix::shape() const { return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")"; }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix& Matrix::operator+=(const Matrix& o) {
  if (!same_shape(o)) throw InvalidArgument("Matrix +=: shape " + shape() + " vs " + o.shape());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

}  // namespace metroplan::nn
