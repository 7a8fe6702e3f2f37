#include "gfd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gfd {

namespace {

constexpr double kProbClamp = 1e-12;

void check_finite(const TensorNode& n) {
  for (double v : n.value)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite value in op output");
}

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

size_t idx3(const Shape& s, int b, int r, int c) {
  return (static_cast<size_t>(b) * s.rows + r) * s.cols + c;
}

}  // namespace

std::string Shape::str() const {
  return "[" + std::to_string(batch) + "," + std::to_string(rows) + "," + std::to_string(cols) + "]";
}

TensorPtr make_tensor(Shape shape, double fill) {
  auto n = std::make_shared<TensorNode>();
  n->shape = shape;
  n->value.assign(shape.size(), fill);
  return n;
}

TensorPtr make_tensor(Shape shape, std::vector<double> values) {
  require(values.size() == shape.size(), "value count does not match shape");
  auto n = std::make_shared<TensorNode>();
  n->shape = shape;
  n->value = std::move(values);
  return n;
}

TensorPtr make_parameter(const std::string& name, Shape shape, std::vector<double> values) {
  auto n = make_tensor(shape, std::move(values));
  n->requires_grad = true;
  n->name = name;
  n->ensure_grad();
  return n;
}

TensorPtr Tape::record(TensorPtr node) {
  check_finite(*node);
  order_.push_back(node);
  return node;
}

void Tape::backward(const TensorPtr& loss) {
  require(loss->shape.size() == 1, "backward requires a scalar loss");
  if (order_.empty()) throw std::runtime_error("backward called on an empty tape");
  if (backward_done_) throw std::logic_error("double backward on one tape is unsupported");
  backward_done_ = true;
  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    TensorNode& n = **it;
    if (n.backward_fn && !n.grad.empty()) n.backward_fn(n);
  }
}

void Tape::clear() {
  order_.clear();
  backward_done_ = false;
}

TensorPtr matmul(Tape& tape, TensorPtr a, TensorPtr b) {
  require(a->shape.cols == b->shape.rows, "matmul inner dimension mismatch");
  require(b->shape.batch == 1 || b->shape.batch == a->shape.batch, "matmul batch mismatch");
  const int B = a->shape.batch, m = a->shape.rows, k = a->shape.cols, n = b->shape.cols;
  auto out = make_tensor({B, m, n});
  for (int bb = 0; bb < B; ++bb) {
    const double* av = a->value.data() + static_cast<size_t>(bb) * m * k;
    const double* bv = b->value.data() + (b->shape.batch == 1 ? 0 : static_cast<size_t>(bb) * k * n);
    double* ov = out->value.data() + static_cast<size_t>(bb) * m * n;
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < k; ++l) {
        const double x = av[static_cast<size_t>(i) * k + l];
        if (x == 0.0) continue;
        const double* brow = bv + static_cast<size_t>(l) * n;
        double* orow = ov + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) orow[j] += x * brow[j];
      }
  }
  out->inputs = {a, b};
  out->backward_fn = [a, b, B, m, k, n](TensorNode& o) {
    a->ensure_grad();
    b->ensure_grad();
    for (int bb = 0; bb < B; ++bb) {
      const double* g = o.grad.data() + static_cast<size_t>(bb) * m * n;
      const double* av = a->value.data() + static_cast<size_t>(bb) * m * k;
      const size_t boff = (b->shape.batch == 1 ? 0 : static_cast<size_t>(bb) * k * n);
      const double* bv = b->value.data() + boff;
      double* da = a->grad.data() + static_cast<size_t>(bb) * m * k;
      double* db = b->grad.data() + boff;
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
          const double* grow = g + static_cast<size_t>(i) * n;
          const double* brow = bv + static_cast<size_t>(l) * n;
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          da[static_cast<size_t>(i) * k + l] += acc;
          const double x = av[static_cast<size_t>(i) * k + l];
          if (x != 0.0) {
            double* dbrow = db + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) dbrow[j] += x * grow[j];
          }
        }
    }
  };
  return tape.record(out);
}

TensorPtr matmul_nt(Tape& tape, TensorPtr a, TensorPtr b) {
  require(a->shape.cols == b->shape.cols, "matmul_nt inner dimension mismatch");
  require(b->shape.batch == 1 || b->shape.batch == a->shape.batch, "matmul_nt batch mismatch");
  const int B = a->shape.batch, m = a->shape.rows, k = a->shape.cols, n = b->shape.rows;
  auto out = make_tensor({B, m, n});
  for (int bb = 0; bb < B; ++bb) {
    const double* av = a->value.data() + static_cast<size_t>(bb) * m * k;
    const double* bv = b->value.data() + (b->shape.batch == 1 ? 0 : static_cast<size_t>(bb) * n * k);
    double* ov = out->value.data() + static_cast<size_t>(bb) * m * n;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        const double* arow = av + static_cast<size_t>(i) * k;
        const double* brow = bv + static_cast<size_t>(j) * k;
        double acc = 0.0;
        for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
        ov[static_cast<size_t>(i) * n + j] = acc;
      }
  }
  out->inputs = {a, b};
  out->backward_fn = [a, b, B, m, k, n](TensorNode& o) {
    a->ensure_grad();
    b->ensure_grad();
    for (int bb = 0; bb < B; ++bb) {
      const double* g = o.grad.data() + static_cast<size_t>(bb) * m * n;
      const double* av = a->value.data() + static_cast<size_t>(bb) * m * k;
      const size_t boff = (b->shape.batch == 1 ? 0 : static_cast<size_t>(bb) * n * k);
      const double* bv = b->value.data() + boff;
      double* da = a->grad.data() + static_cast<size_t>(bb) * m * k;
      double* db = b->grad.data() + boff;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const double gij = g[static_cast<size_t>(i) * n + j];
          if (gij == 0.0) continue;
          const double* arow = av + static_cast<size_t>(i) * k;
          const double* brow = bv + static_cast<size_t>(j) * k;
          double* darow = da + static_cast<size_t>(i) * k;
          double* dbrow = db + static_cast<size_t>(j) * k;
          for (int l = 0; l < k; ++l) {
            darow[l] += gij * brow[l];
            dbrow[l] += gij * arow[l];
          }
        }
    }
  };
  return tape.record(out);
}

TensorPtr add(Tape& tape, TensorPtr a, TensorPtr b) {
  const Shape& sa = a->shape;
  const Shape& sb = b->shape;
  bool same = sa == sb;
  bool bcast_batch = (sb.batch == 1 && sb.rows == sa.rows && sb.cols == sa.cols);
  bool bcast_bias = (sb.batch == 1 && sb.rows == 1 && sb.cols == sa.cols);
  require(same || bcast_batch || bcast_bias, "add shape mismatch");
  auto out = make_tensor(sa);
  for (int bb = 0; bb < sa.batch; ++bb)
    for (int r = 0; r < sa.rows; ++r)
      for (int c = 0; c < sa.cols; ++c) {
        size_t bi = same ? idx3(sa, bb, r, c) : (bcast_batch ? idx3(sb, 0, r, c) : static_cast<size_t>(c));
        out->value[idx3(sa, bb, r, c)] = a->value[idx3(sa, bb, r, c)] + b->value[bi];
      }
  out->inputs = {a, b};
  out->backward_fn = [a, b, same, bcast_batch](TensorNode& o) {
    a->ensure_grad();
    b->ensure_grad();
    const Shape& sa = a->shape;
    const Shape& sb = b->shape;
    for (size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += o.grad[i];
    for (int bb = 0; bb < sa.batch; ++bb)
      for (int r = 0; r < sa.rows; ++r)
        for (int c = 0; c < sa.cols; ++c) {
          size_t bi = same ? idx3(sa, bb, r, c) : (bcast_batch ? idx3(sb, 0, r, c) : static_cast<size_t>(c));
          b->grad[bi] += o.grad[idx3(sa, bb, r, c)];
        }
  };
  return tape.record(out);
}

TensorPtr scale(Tape& tape, TensorPtr a, double s) {
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < a->value.size(); ++i) out->value[i] = a->value[i] * s;
  out->inputs = {a};
  out->backward_fn = [a, s](TensorNode& o) {
    a->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += o.grad[i] * s;
  };
  return tape.record(out);
}

TensorPtr row_softmax(Tape& tape, TensorPtr x) {
  const Shape s = x->shape;
  auto out = make_tensor(s);
  const int rows = s.batch * s.rows, c = s.cols;
  for (int r = 0; r < rows; ++r) {
    const double* xv = x->value.data() + static_cast<size_t>(r) * c;
    double* ov = out->value.data() + static_cast<size_t>(r) * c;
    double mx = xv[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, xv[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += (ov[j] = std::exp(xv[j] - mx));
    for (int j = 0; j < c; ++j) ov[j] /= sum;
  }
  out->inputs = {x};
  out->backward_fn = [x, rows, c](TensorNode& o) {
    x->ensure_grad();
    for (int r = 0; r < rows; ++r) {
      const double* y = o.value.data() + static_cast<size_t>(r) * c;
      const double* g = o.grad.data() + static_cast<size_t>(r) * c;
      double* dx = x->grad.data() + static_cast<size_t>(r) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += g[j] * y[j];
      for (int j = 0; j < c; ++j) dx[j] += y[j] * (g[j] - dot);
    }
  };
  return tape.record(out);
}

TensorPtr layer_norm(Tape& tape, TensorPtr x, TensorPtr gain, TensorPtr bias, double eps) {
  require(eps > 0.0, "layer_norm eps must be positive");
  const Shape s = x->shape;
  require(gain->shape.cols == s.cols && bias->shape.cols == s.cols, "layer_norm affine shape mismatch");
  const int rows = s.batch * s.rows, c = s.cols;
  auto out = make_tensor(s);
  auto normalized = std::make_shared<std::vector<double>>(x->value.size());
  auto inv_sigma = std::make_shared<std::vector<double>>(rows);
  for (int r = 0; r < rows; ++r) {
    const double* xv = x->value.data() + static_cast<size_t>(r) * c;
    double* y0 = normalized->data() + static_cast<size_t>(r) * c;
    double* ov = out->value.data() + static_cast<size_t>(r) * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += xv[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (xv[j] - mean) * (xv[j] - mean);
    var /= c;
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[r] = inv;
    for (int j = 0; j < c; ++j) {
      y0[j] = (xv[j] - mean) * inv;
      ov[j] = y0[j] * gain->value[j] + bias->value[j];
    }
  }
  out->inputs = {x, gain, bias};
  out->backward_fn = [x, gain, bias, normalized, inv_sigma, rows, c](TensorNode& o) {
    x->ensure_grad();
    gain->ensure_grad();
    bias->ensure_grad();
    for (int r = 0; r < rows; ++r) {
      const double* g = o.grad.data() + static_cast<size_t>(r) * c;
      const double* y0 = normalized->data() + static_cast<size_t>(r) * c;
      double* dx = x->grad.data() + static_cast<size_t>(r) * c;
      const double inv = (*inv_sigma)[r];
      double mean_dy = 0.0, mean_dyy = 0.0;
      for (int j = 0; j < c; ++j) {
        const double dy = g[j] * gain->value[j];
        mean_dy += dy;
        mean_dyy += dy * y0[j];
        gain->grad[j] += g[j] * y0[j];
        bias->grad[j] += g[j];
      }
      mean_dy /= c;
      mean_dyy /= c;
      for (int j = 0; j < c; ++j) {
        const double dy = g[j] * gain->value[j];
        dx[j] += inv * (dy - mean_dy - y0[j] * mean_dyy);
      }
    }
  };
  return tape.record(out);
}

TensorPtr activation(Tape& tape, TensorPtr x, Activation kind) {
  auto out = make_tensor(x->shape);
  if (kind == Activation::relu) {
    for (size_t i = 0; i < x->value.size(); ++i) out->value[i] = std::max(0.0, x->value[i]);
  } else {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    for (size_t i = 0; i < x->value.size(); ++i) {
      const double v = x->value[i];
      out->value[i] = 0.5 * v * (1.0 + std::tanh(kC * (v + 0.044715 * v * v * v)));
    }
  }
  out->inputs = {x};
  out->backward_fn = [x, kind](TensorNode& o) {
    x->ensure_grad();
    if (kind == Activation::relu) {
      for (size_t i = 0; i < o.grad.size(); ++i)
        if (x->value[i] > 0.0) x->grad[i] += o.grad[i];
    } else {
      constexpr double kC = 0.7978845608028654;
      for (size_t i = 0; i < o.grad.size(); ++i) {
        const double v = x->value[i];
        const double t = std::tanh(kC * (v + 0.044715 * v * v * v));
        const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * 0.044715 * v * v);
        x->grad[i] += o.grad[i] * d;
      }
    }
  };
  return tape.record(out);
}

TensorPtr sigmoid(Tape& tape, TensorPtr x) {
  auto out = make_tensor(x->shape);
  for (size_t i = 0; i < x->value.size(); ++i) out->value[i] = 1.0 / (1.0 + std::exp(-x->value[i]));
  out->inputs = {x};
  out->backward_fn = [x](TensorNode& o) {
    x->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i) {
      const double y = o.value[i];
      x->grad[i] += o.grad[i] * y * (1.0 - y);
    }
  };
  return tape.record(out);
}

TensorPtr embed_lookup(Tape& tape, TensorPtr table, const std::vector<int>& indices) {
  const int d = table->shape.cols, P = table->shape.rows;
  require(table->shape.batch == 1, "embedding table must be 2D");
  for (int i : indices) require(i >= 0 && i < P, "embedding index out of range");
  auto out = make_tensor({1, static_cast<int>(indices.size()), d});
  for (size_t r = 0; r < indices.size(); ++r)
    std::copy_n(table->value.data() + static_cast<size_t>(indices[r]) * d, d,
                out->value.data() + r * d);
  auto idx = std::make_shared<std::vector<int>>(indices);
  out->inputs = {table};
  out->backward_fn = [table, idx, d](TensorNode& o) {
    table->ensure_grad();
    for (size_t r = 0; r < idx->size(); ++r) {
      const double* g = o.grad.data() + r * d;
      double* dt = table->grad.data() + static_cast<size_t>((*idx)[r]) * d;
      for (int j = 0; j < d; ++j) dt[j] += g[j];
    }
  };
  return tape.record(out);
}

TensorPtr gather_rows(Tape& tape, TensorPtr x, const std::vector<int>& indices) {
  const Shape s = x->shape;
  for (int i : indices) require(i >= 0 && i < s.rows, "gather index out of range");
  auto out = make_tensor({s.batch, static_cast<int>(indices.size()), s.cols});
  for (int bb = 0; bb < s.batch; ++bb)
    for (size_t r = 0; r < indices.size(); ++r)
      std::copy_n(x->value.data() + idx3(s, bb, indices[r], 0), s.cols,
                  out->value.data() + idx3(out->shape, bb, static_cast<int>(r), 0));
  auto idx = std::make_shared<std::vector<int>>(indices);
  out->inputs = {x};
  out->backward_fn = [x, idx](TensorNode& o) {
    x->ensure_grad();
    const Shape s = x->shape;
    for (int bb = 0; bb < s.batch; ++bb)
      for (size_t r = 0; r < idx->size(); ++r) {
        const double* g = o.grad.data() + idx3(o.shape, bb, static_cast<int>(r), 0);
        double* dx = x->grad.data() + idx3(s, bb, (*idx)[r], 0);
        for (int c = 0; c < s.cols; ++c) dx[c] += g[c];
      }
  };
  return tape.record(out);
}

TensorPtr concat_cols(Tape& tape, const std::vector<TensorPtr>& parts) {
  require(!parts.empty(), "concat_cols needs at least one input");
  const int B = parts[0]->shape.batch, m = parts[0]->shape.rows;
  int total = 0;
  for (const auto& p : parts) {
    require(p->shape.batch == B && p->shape.rows == m, "concat_cols shape mismatch");
    total += p->shape.cols;
  }
  auto out = make_tensor({B, m, total});
  int off = 0;
  for (const auto& p : parts) {
    const int c = p->shape.cols;
    for (int bb = 0; bb < B; ++bb)
      for (int r = 0; r < m; ++r)
        std::copy_n(p->value.data() + idx3(p->shape, bb, r, 0), c,
                    out->value.data() + idx3(out->shape, bb, r, off));
    off += c;
  }
  out->inputs = parts;
  out->backward_fn = [parts, B, m](TensorNode& o) {
    int off = 0;
    for (const auto& p : parts) {
      p->ensure_grad();
      const int c = p->shape.cols;
      for (int bb = 0; bb < B; ++bb)
        for (int r = 0; r < m; ++r) {
          const double* g = o.grad.data() + idx3(o.shape, bb, r, off);
          double* dp = p->grad.data() + idx3(p->shape, bb, r, 0);
          for (int j = 0; j < c; ++j) dp[j] += g[j];
        }
      off += c;
    }
  };
  return tape.record(out);
}

TensorPtr flatten_rows(Tape& tape, TensorPtr x) {
  const Shape s = x->shape;
  auto out = make_tensor({s.batch, 1, s.rows * s.cols});
  out->value = x->value;  // row-major layout is already flat per batch
  out->inputs = {x};
  out->backward_fn = [x](TensorNode& o) {
    x->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i) x->grad[i] += o.grad[i];
  };
  return tape.record(out);
}

TensorPtr dropout(Tape& tape, TensorPtr x, double rate, bool training, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must be in [0,1)");
  if (!training || rate == 0.0) return x;
  auto out = make_tensor(x->shape);
  auto mask = std::make_shared<std::vector<double>>(x->value.size());
  const double keep = 1.0 - rate, inv_keep = 1.0 / keep;
  for (size_t i = 0; i < x->value.size(); ++i) {
    (*mask)[i] = (rng.uniform() < keep) ? inv_keep : 0.0;
    out->value[i] = x->value[i] * (*mask)[i];
  }
  out->inputs = {x};
  out->backward_fn = [x, mask](TensorNode& o) {
    x->ensure_grad();
    for (size_t i = 0; i < o.grad.size(); ++i) x->grad[i] += o.grad[i] * (*mask)[i];
  };
  return tape.record(out);
}

TensorPtr bce_sum(Tape& tape, TensorPtr probs, const std::vector<double>& targets) {
  require(probs->value.size() == targets.size(), "bce_sum size mismatch");
  auto out = make_tensor({1, 1, 1});
  auto clamped = std::make_shared<std::vector<double>>(probs->value.size());
  double loss = 0.0;
  for (size_t i = 0; i < probs->value.size(); ++i) {
    const double p = std::clamp(probs->value[i], kProbClamp, 1.0 - kProbClamp);
    (*clamped)[i] = p;
    loss -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  out->value[0] = loss;
  auto y = std::make_shared<std::vector<double>>(targets);
  out->inputs = {probs};
  out->backward_fn = [probs, clamped, y](TensorNode& o) {
    probs->ensure_grad();
    const double g = o.grad[0];
    for (size_t i = 0; i < probs->grad.size(); ++i) {
      const double p = (*clamped)[i];
      probs->grad[i] += g * (p - (*y)[i]) / (p * (1.0 - p));
    }
  };
  return tape.record(out);
}

TensorPtr sum_squares(Tape& tape, TensorPtr x) {
  auto out = make_tensor({1, 1, 1});
  double acc = 0.0;
  for (double v : x->value) acc += v * v;
  out->value[0] = acc;
  out->inputs = {x};
  out->backward_fn = [x](TensorNode& o) {
    x->ensure_grad();
    const double g = o.grad[0];
    for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g * 2.0 * x->value[i];
  };
  return tape.record(out);
}

GradCheckReport grad_check(const std::function<TensorPtr(Tape&)>& closure,
                           const std::vector<TensorPtr>& params, double h, double tol) {
  auto eval = [&closure]() {
    Tape t;
    return closure(t)->scalar();
  };

  // determinism guard: two fresh forward passes must agree exactly
  {
    const double a = eval(), b = eval();
    if (a != b) throw std::runtime_error("grad_check: closure is non-deterministic");
  }

  for (const auto& p : params) p->zero_grad();
  Tape tape;
  TensorPtr loss = closure(tape);
  tape.backward(loss);

  GradCheckReport report;
  for (const auto& p : params) {
    GradCheckEntry entry;
    entry.name = p->name;
    std::vector<double> ad = p->grad;
    for (size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = eval();
      p->value[i] = saved - h;
      const double down = eval();
      p->value[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::fabs(ad[i]), std::fabs(fd), 1e-8});
      entry.max_rel_error = std::max(entry.max_rel_error, std::fabs(ad[i] - fd) / denom);
    }
    entry.pass = entry.max_rel_error < tol;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace gfd
