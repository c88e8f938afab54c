// Copyright 2026-present the geodist authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace geodist {

// Raised when a file or container fails structural validation.
class CorruptInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a query references indices outside the indexed set.
class BadQuery : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Raised when a brute-force computation is asked to exceed its size budget.
class SizeLimit : public std::length_error {
 public:
  using std::length_error::length_error;
};

using FeatureVector = std::vector<double>;

// Row-major dense collection of equal-length feature vectors.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}
  PointSet(std::size_t count, std::size_t dim) : dim_(dim), data_(count * dim, 0.0) {}
  PointSet(std::size_t dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
    if (dim_ == 0 ? !data_.empty() : data_.size() % dim_ != 0) {
      throw std::invalid_argument("PointSet: data length is not a multiple of dim");
    }
  }

  static PointSet from_rows(const std::vector<FeatureVector>& rows) {
    if (rows.empty()) return {};
    PointSet out(rows.front().size());
    out.data_.reserve(rows.size() * out.dim_);
    for (const auto& r : rows) out.push_back(r);
    return out;
  }

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> operator[](std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<double> operator[](std::size_t i) noexcept { return {data_.data() + i * dim_, dim_}; }

  void push_back(std::span<const double> row) {
    if (row.size() != dim_) {
      throw std::invalid_argument("PointSet: row has dim " + std::to_string(row.size()) +
                                  ", expected " + std::to_string(dim_));
    }
    data_.insert(data_.end(), row.begin(), row.end());
  }

  PointSet subset(std::span<const std::uint32_t> rows) const {
    PointSet out(dim_);
    out.data_.reserve(rows.size() * dim_);
    for (auto r : rows) out.push_back((*this)[r]);
    return out;
  }

  FeatureVector row_vector(std::size_t i) const {
    auto r = (*this)[i];
    return {r.begin(), r.end()};
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

}  // namespace geodist
