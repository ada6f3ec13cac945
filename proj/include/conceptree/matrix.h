#ifndef CONCEPTREE_MATRIX_H_
#define CONCEPTREE_MATRIX_H_

#include <cassert>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace conceptree {

// Dense row-major matrix. Rows are exposed as spans so callers never touch
// the raw buffer layout.
template <typename T>
class RowMatrix {
 public:
  RowMatrix() = default;
  RowMatrix(size_t rows, size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  RowMatrix(size_t rows, size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    assert(data_.size() == rows_ * cols_);
  }

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  friend bool operator==(const RowMatrix&, const RowMatrix&) = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<T> data_;
};

using FloatMatrix = RowMatrix<float>;
using BitMatrix = RowMatrix<unsigned char>;

}  // namespace conceptree

#endif  // CONCEPTREE_MATRIX_H_
