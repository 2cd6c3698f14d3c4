#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace irisforge::nn {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, float fill = 0.0f);
  Tensor(std::vector<int> shape, std::vector<float> values);

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(i); }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  void fill(float v);
  void reshape(std::vector<int> shape);
  bool all_finite() const;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

// A value in the computation tape. Parameters are long-lived leaves; every
// other node is created by an op during a forward pass and dropped with it.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  std::string name;

  Tensor& ensure_grad();
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor t);
Var parameter(Tensor t, std::string name);
Var detach(const Var& v);

// Reverse-mode sweep from a scalar root (seed 1) or with an explicit seed.
void backward(const Var& root);
void backward(const Var& root, const Tensor& seed);

}  // namespace irisforge::nn
