#pragma once

// Image, pixel-set and mask types plus the column-major vec/unvec reshaping.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tfae/error.hpp"

namespace tfae {

/// Pixel address. `row` runs along y (height), `col` along x (width).
struct Pixel {
  std::size_t row = 0;
  std::size_t col = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Dense 2D grid stored row-major.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}
  Grid(std::size_t width, std::size_t height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != width_ * height_) {
      throw DimensionError("grid data size " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(width_) + "x" +
                           std::to_string(height_));
    }
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t row, std::size_t col) { return data_[row * width_ + col]; }
  const T& operator()(std::size_t row, std::size_t col) const {
    return data_[row * width_ + col];
  }
  T& operator[](Pixel p) { return (*this)(p.row, p.col); }
  const T& operator[](Pixel p) const { return (*this)(p.row, p.col); }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  template <class U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

/// Real intensities; images handed to the segmenter live in [0,1].
using Image = Grid<double>;
/// Unconstrained real field (derivative responses, coefficient bands).
using RealField = Grid<double>;

template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": grid " + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                         "x" + std::to_string(b.height()));
  }
}

/// Boolean membership over a grid with a cached cardinality.
class PixelSet {
 public:
  PixelSet() = default;
  PixelSet(std::size_t width, std::size_t height) : members_(width, height, 0) {}

  template <class Pred>
  static PixelSet from_predicate(std::size_t width, std::size_t height, Pred&& pred) {
    PixelSet s(width, height);
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        if (pred(Pixel{r, c})) s.insert(Pixel{r, c});
      }
    }
    return s;
  }

  static PixelSet full(std::size_t width, std::size_t height) {
    return from_predicate(width, height, [](Pixel) { return true; });
  }

  std::size_t width() const { return members_.width(); }
  std::size_t height() const { return members_.height(); }
  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }

  bool contains(Pixel p) const { return members_[p] != 0; }
  bool contains(std::size_t row, std::size_t col) const { return members_(row, col) != 0; }

  void insert(Pixel p) {
    if (!members_[p]) {
      members_[p] = 1;
      ++count_;
    }
  }
  void erase(Pixel p) {
    if (members_[p]) {
      members_[p] = 0;
      --count_;
    }
  }

  /// Every member of this set is also a member of `other`.
  bool subset_of(const PixelSet& other) const {
    require_same_shape(members_, other.members_, "PixelSet::subset_of");
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (members_.values()[i] && !other.members_.values()[i]) return false;
    }
    return true;
  }

  const Grid<std::uint8_t>& grid() const { return members_; }

  friend bool operator==(const PixelSet& a, const PixelSet& b) {
    return a.members_ == b.members_;
  }

 private:
  Grid<std::uint8_t> members_;
  std::size_t count_ = 0;
};

/// Two-valued segmentation result: 1 = vessel, 0 = background.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t width, std::size_t height) : values_(width, height, 0) {}

  /// Accepts only grids whose values are exactly 0 or 1.
  static BinaryMask from_two_valued(const Image& img) {
    BinaryMask m(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double v = img.values()[i];
      if (v != 0.0 && v != 1.0) {
        throw DataError("image is not two-valued; found " + std::to_string(v));
      }
      m.values_.values()[i] = v == 1.0 ? 1 : 0;
    }
    return m;
  }

  /// Any nonzero entry counts as vessel.
  static BinaryMask from_nonzero(const Grid<std::uint8_t>& g) {
    BinaryMask m(g.width(), g.height());
    for (std::size_t i = 0; i < g.size(); ++i) m.values_.values()[i] = g.values()[i] ? 1 : 0;
    return m;
  }

  std::size_t width() const { return values_.width(); }
  std::size_t height() const { return values_.height(); }
  std::size_t size() const { return values_.size(); }

  bool operator[](Pixel p) const { return values_[p] != 0; }
  bool at(std::size_t row, std::size_t col) const { return values_(row, col) != 0; }
  void set(Pixel p, bool vessel) { values_[p] = vessel ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(values_.values().begin(), values_.values().end(), 1));
  }

  const Grid<std::uint8_t>& grid() const { return values_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  Grid<std::uint8_t> values_;
};

/// Column-major flattening: index j = col * height + row.
template <class T>
std::vector<T> vec(const Grid<T>& g) {
  std::vector<T> out;
  out.reserve(g.size());
  for (std::size_t c = 0; c < g.width(); ++c) {
    for (std::size_t r = 0; r < g.height(); ++r) out.push_back(g(r, c));
  }
  return out;
}

/// Inverse of vec for a grid of the given shape.
template <class T>
Grid<T> unvec(std::span<const T> v, std::size_t width, std::size_t height) {
  if (v.size() != width * height) {
    throw DimensionError("unvec: length " + std::to_string(v.size()) + " does not match " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
  Grid<T> g(width, height);
  std::size_t j = 0;
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t r = 0; r < height; ++r) g(r, c) = v[j++];
  }
  return g;
}

/// Elementwise (I - P) base + P replacement where P is the indicator of `set`,
/// all operands in vec order.
inline std::vector<double> blend_on_set(std::span<const double> base,
                                        std::span<const double> replacement,
                                        const PixelSet& set) {
  const std::size_t n = set.width() * set.height();
  if (base.size() != n || replacement.size() != n) {
    throw DimensionError("blend_on_set: operand lengths " + std::to_string(base.size()) + ", " +
                         std::to_string(replacement.size()) + " vs grid of " +
                         std::to_string(n));
  }
  const std::vector<std::uint8_t> indicator = vec(set.grid());
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = indicator[j] ? replacement[j] : base[j];
  return out;
}

inline double min_value(const Image& img) {
  return *std::min_element(img.values().begin(), img.values().end());
}
inline double max_value(const Image& img) {
  return *std::max_element(img.values().begin(), img.values().end());
}

inline Image clamp_unit(Image img) {
  for (double& v : img.values()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

}  // namespace tfae
