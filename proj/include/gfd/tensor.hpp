#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gfd/rng.hpp"

namespace gfd {

// batch x rows x cols; 2D data uses batch=1, scalars are 1x1x1
struct Shape {
  int batch = 1, rows = 1, cols = 1;

  size_t size() const { return static_cast<size_t>(batch) * rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Tape;

// One value in the computation graph. Parameters are TensorNodes that
// outlive tapes and keep their gradient accumulator between steps.
struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string name;  // non-empty for parameters

  // inputs kept alive for backward; backward_fn pushes grad into them
  std::vector<std::shared_ptr<TensorNode>> inputs;
  std::function<void(TensorNode&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
  void zero_grad() { grad.assign(value.size(), 0.0); }
  double scalar() const { return value[0]; }
};

using TensorPtr = std::shared_ptr<TensorNode>;

TensorPtr make_tensor(Shape shape, double fill = 0.0);
TensorPtr make_tensor(Shape shape, std::vector<double> values);
TensorPtr make_parameter(const std::string& name, Shape shape, std::vector<double> values);

// Ordered record of executed ops. backward() replays in exact reverse order
// and accumulates additively into every input's grad buffer. Single-thread
// confinement: one tape per training thread.
class Tape {
 public:
  TensorPtr record(TensorPtr node);
  void backward(const TensorPtr& loss);
  void clear();
  size_t size() const { return order_.size(); }

 private:
  std::vector<TensorPtr> order_;
  bool backward_done_ = false;
};

// --- forward ops; each appends its backward rule to the tape ---
// a: [B,m,k]; b: [1,k,n] broadcasts over batch, or [B,k,n]
TensorPtr matmul(Tape& tape, TensorPtr a, TensorPtr b);
// a: [B,m,k], b: [B,n,k] -> [B,m,n]; a * b^T per batch (attention scores)
TensorPtr matmul_nt(Tape& tape, TensorPtr a, TensorPtr b);
// b of identical shape, or [1,r,c] (broadcast over batch), or [1,1,c] (bias)
TensorPtr add(Tape& tape, TensorPtr a, TensorPtr b);
TensorPtr scale(Tape& tape, TensorPtr a, double s);
TensorPtr row_softmax(Tape& tape, TensorPtr x);  // over last axis, max-subtracted
TensorPtr layer_norm(Tape& tape, TensorPtr x, TensorPtr gain, TensorPtr bias, double eps = 1e-5);
enum class Activation { relu, gelu };
TensorPtr activation(Tape& tape, TensorPtr x, Activation kind);
TensorPtr sigmoid(Tape& tape, TensorPtr x);
// table: [1,P,d]; result [1,|idx|,d] gathers table rows
TensorPtr embed_lookup(Tape& tape, TensorPtr table, const std::vector<int>& indices);
// picks rows along axis 1: [B,S,c] -> [B,|idx|,c]
TensorPtr gather_rows(Tape& tape, TensorPtr x, const std::vector<int>& indices);
TensorPtr concat_cols(Tape& tape, const std::vector<TensorPtr>& parts);
// [B,r,c] -> [B,1,r*c]
TensorPtr flatten_rows(Tape& tape, TensorPtr x);
// inverted dropout; identity when !training or rate == 0
TensorPtr dropout(Tape& tape, TensorPtr x, double rate, bool training, Rng& rng);
// -sum(y log p + (1-y) log(1-p)), p read from x[:,0,0], clamped away from {0,1}
TensorPtr bce_sum(Tape& tape, TensorPtr probs, const std::vector<double>& targets);
TensorPtr sum_squares(Tape& tape, TensorPtr x);  // scalar

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool pass = true;
  double max_rel_error = 0.0;
};

// closure builds the loss on a fresh tape; must be deterministic (two
// forward passes are compared and a mismatch throws)
GradCheckReport grad_check(const std::function<TensorPtr(Tape&)>& closure,
                           const std::vector<TensorPtr>& params, double h = 1e-5,
                           double tol = 1e-4);

}  // namespace gfd
