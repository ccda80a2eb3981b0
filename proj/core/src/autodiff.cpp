// Copyright 2026 The mavil-desk Authors. All Rights Reserved.
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

#include "mavil/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mavil {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  round_if_needed(value);
  nodes_.push_back(Node{std::move(value), Tensor{}, false, requires_grad, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
              std::move(backward));
}

Var Tape::push(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw std::logic_error("Tape::push: parent from another tape");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  round_if_needed(value);
  nodes_.push_back(Node{std::move(value), Tensor{}, false, needs,
                        needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad_set) {
    n.grad = Tensor::zeros_like(n.value);
    n.grad_set = true;
  }
  return n.grad;
}

void Tape::round_if_needed(Tensor& t) const {
  if (precision_ != Precision::F32) return;
  for (double& x : t.vec()) x = static_cast<double>(static_cast<float>(x));
}

std::vector<Tensor> Tape::backward(Var loss, std::span<const Var> wrt) {
  if (&loss.tape() != this) throw std::logic_error("Tape::backward: loss from another tape");
  if (loss.value().size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  }
  if (nodes_[loss.id()].requires_grad) {
    grad(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad_set && n.backward) n.backward(*this, i);
    }
  }
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Var& v : wrt) {
    const Node& n = nodes_[v.id()];
    out.push_back(n.grad_set ? n.grad : Tensor::zeros_like(n.value));
  }
  nodes_.clear();
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.shape()) + " @ " +
                                shape_str(b.shape()));
  }
  Tensor c(Shape{m, n});
  const double* A = a.vec().data();
  const double* B = b.vec().data();
  double* C = c.vec().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + p * n;
      double* crow = C + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor t(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

namespace ops {
namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                              shape_str(b));
}

Shape mat_shape(const Tensor& t) { return Shape{t.rows(), t.cols()}; }

// True when b is a single row whose width matches a's columns.
bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() >= 1 && b.rank() <= 2 && b.rows() == 1 &&
         b.cols() == a.cols() && a.rows() != 1;
}

void accumulate(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = a.tape();
  Tensor out = mavil::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    if (tp.requires_grad(ia)) {
      Tensor& gA = tp.grad(ia);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * B[p * n + j];
          gA[i * k + p] += s;
        }
    }
    if (tp.requires_grad(ib)) {
      Tensor& gB = tp.grad(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gB[p * n + j] += av * g[i * n + j];
        }
    }
  });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool bcast = is_row_broadcast(A, B);
  if (!bcast && A.shape() != B.shape()) shape_error("add", A.shape(), B.shape());
  Tensor out = A;
  if (bcast) {
    const std::size_t n = A.cols();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i % n];
  } else {
    accumulate(out, B);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {a, b}, [ia, ib, bcast](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) accumulate(tp.grad(ia), g);
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      if (bcast) {
        const std::size_t n = gb.size();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
      } else {
        accumulate(gb, g);
      }
    }
  });
}

Var sub(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape() != B.shape()) shape_error("sub", A.shape(), B.shape());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) accumulate(tp.grad(ia), g);
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool bcast = is_row_broadcast(A, B);
  if (!bcast && A.shape() != B.shape()) shape_error("mul", A.shape(), B.shape());
  const std::size_t n = bcast ? B.size() : A.size();
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i % n];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {a, b}, [ia, ib, n](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i % n];
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i] * A[i];
    }
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (double& x : out.vec()) x *= c;
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {a}, [ia, c](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

Var transpose(Var a) {
  Tensor out = mavil::transpose(a.value());
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {a}, [ia](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    const std::size_t m = g.rows(), n = g.cols();  // g is [n_a, m_a] transposed
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[j * m + i] += g[i * n + j];
  });
}

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  Tape& t = parts.front().tape();
  std::vector<std::size_t> ids, extents;
  std::size_t rows = 0, cols = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    if (axis == 0) {
      if (!ids.empty() && v.cols() != cols)
        shape_error("concat(axis=0)", Shape{rows, cols}, mat_shape(v));
      cols = v.cols();
      rows += v.rows();
      extents.push_back(v.rows());
    } else {
      if (!ids.empty() && v.rows() != rows)
        shape_error("concat(axis=1)", Shape{rows, cols}, mat_shape(v));
      rows = v.rows();
      cols += v.cols();
      extents.push_back(v.cols());
    }
    ids.push_back(p.id());
  }
  Tensor out(Shape{rows, cols});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    const std::size_t vr = v.rows(), vc = v.cols();
    for (std::size_t i = 0; i < vr; ++i)
      for (std::size_t j = 0; j < vc; ++j) {
        if (axis == 0) out.at(offset + i, j) = v[i * vc + j];
        else out.at(i, offset + j) = v[i * vc + j];
      }
    offset += extents[k];
  }
  return t.push(std::move(out), parts, [ids, extents, axis](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const std::size_t gc = g.cols();
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(ids[k])) {
        Tensor& gp = tp.grad(ids[k]);
        const std::size_t vr = tp.value(ids[k]).rows(), vc = tp.value(ids[k]).cols();
        for (std::size_t i = 0; i < vr; ++i)
          for (std::size_t j = 0; j < vc; ++j)
            gp[i * vc + j] += axis == 0 ? g[(offset + i) * gc + j] : g[i * gc + offset + j];
      }
      offset += extents[k];
    }
  });
}

Var slice(Var a, int axis, std::size_t start, std::size_t count) {
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  const std::size_t extent = axis == 0 ? m : n;
  if ((axis != 0 && axis != 1) || start + count > extent) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") on axis " +
                                std::to_string(axis) + " out of bounds for " +
                                shape_str(mat_shape(A)));
  }
  const std::size_t orows = axis == 0 ? count : m, ocols = axis == 0 ? n : count;
  Tensor out(Shape{orows, ocols});
  for (std::size_t i = 0; i < orows; ++i)
    for (std::size_t j = 0; j < ocols; ++j)
      out.at(i, j) = axis == 0 ? A[(start + i) * n + j] : A[i * n + start + j];
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {a},
                       [ia, axis, start, orows, ocols, n](Tape& tp, std::size_t self) {
                         const Tensor& g = tp.grad(self);
                         Tensor& ga = tp.grad(ia);
                         for (std::size_t i = 0; i < orows; ++i)
                           for (std::size_t j = 0; j < ocols; ++j) {
                             const std::size_t src =
                                 axis == 0 ? (start + i) * n + j : i * n + start + j;
                             ga[src] += g[i * ocols + j];
                           }
                       });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor out(Shape{index.size(), n});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= m) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(index[i]) +
                                  " out of range for " + shape_str(mat_shape(A)));
    }
    std::copy_n(A.vec().begin() + static_cast<std::ptrdiff_t>(index[i] * n), n,
                out.vec().begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {a}, [ia, idx = std::move(idx), n](Tape& tp,
                                                                         std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) ga[idx[i] * n + j] += g[i * n + j];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().vec()) s += x;
  const std::size_t ia = a.id();
  return a.tape().push(Tensor::scalar(s), {a}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    for (double& x : tp.grad(ia).vec()) x += g;
  });
}

Var mean(Var a) {
  const std::size_t count = a.value().size();
  if (count == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(count));
}

Var mean_rows(Var a) {
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  if (m == 0) throw std::invalid_argument("mean_rows: no rows");
  Tensor out(Shape{1, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += A[i * n + j];
  for (double& x : out.vec()) x /= static_cast<double>(m);
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {a}, [ia, m, n](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j] * inv;
  });
}

namespace {

// Shared layer-norm core; gamma/beta ids are optional.
Var layer_norm_impl(Var x, const Var* gamma, const Var* beta, double eps) {
  const Tensor& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  if (gamma && (gamma->value().size() != n || beta->value().size() != n)) {
    shape_error("layer_norm", mat_shape(X), gamma->value().shape());
  }
  Tensor xhat(Shape{m, n});
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += X[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = X[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) xhat[i * n + j] = (X[i * n + j] - mu) * inv_std[i];
  }
  Tensor out = xhat;
  if (gamma) {
    const Tensor& G = gamma->value();
    const Tensor& B = beta->value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xhat[i * n + j] * G[j] + B[j];
  }
  const std::size_t ix = x.id();
  const std::size_t ig = gamma ? gamma->id() : 0, ibeta = beta ? beta->id() : 0;
  const bool affine = gamma != nullptr;
  auto back = [ix, ig, ibeta, affine, m, n, xhat = std::move(xhat),
               inv_std = std::move(inv_std)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    std::vector<double> dxhat(n);
    for (std::size_t i = 0; i < m; ++i) {
      const double* gi = g.vec().data() + i * n;
      const double* xh = xhat.vec().data() + i * n;
      if (affine) {
        const Tensor& G = tp.value(ig);
        for (std::size_t j = 0; j < n; ++j) dxhat[j] = gi[j] * G[j];
        if (tp.requires_grad(ig)) {
          Tensor& gg = tp.grad(ig);
          for (std::size_t j = 0; j < n; ++j) gg[j] += gi[j] * xh[j];
        }
        if (tp.requires_grad(ibeta)) {
          Tensor& gb = tp.grad(ibeta);
          for (std::size_t j = 0; j < n; ++j) gb[j] += gi[j];
        }
      } else {
        std::copy_n(gi, n, dxhat.begin());
      }
      if (tp.requires_grad(ix)) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * xh[j];
        }
        mean_d /= static_cast<double>(n);
        mean_dx /= static_cast<double>(n);
        Tensor& gx = tp.grad(ix);
        for (std::size_t j = 0; j < n; ++j)
          gx[i * n + j] += inv_std[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
      }
    }
  };
  if (affine) return x.tape().push(std::move(out), {x, *gamma, *beta}, std::move(back));
  return x.tape().push(std::move(out), {x}, std::move(back));
}

}  // namespace

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  return layer_norm_impl(x, &gamma, &beta, eps);
}

Var layer_norm(Var x, double eps) { return layer_norm_impl(x, nullptr, nullptr, eps); }

Var gelu(Var a) {
  Tensor out = a.value();
  for (double& x : out.vec()) x = x * normal_cdf(x);
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {a}, [ia](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& X = tp.value(ia);
    Tensor& ga = tp.grad(ia);
    constexpr double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = X[i];
      ga[i] += g[i] * (normal_cdf(x) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x));
    }
  });
}

namespace {

Tensor softmax_values(const Tensor& A) {
  const std::size_t m = A.rows(), n = A.cols();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* a = A.vec().data() + i * n;
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, a[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(a[j] - mx);
      s += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= s;
  }
  return out;
}

}  // namespace

Var softmax_rows(Var a) {
  Tensor out = softmax_values(a.value());
  const std::size_t ia = a.id();
  const std::size_t n = out.cols();
  return a.tape().push(out, {a}, [ia, n](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    Tensor& ga = tp.grad(ia);
    const std::size_t m = g.size() / n;
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  const Tensor& A = a.value();
  Tensor sm = softmax_values(A);
  Tensor out = A;
  const std::size_t m = A.rows(), n = A.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, A[i * n + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(A[i * n + j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] -= lse;
  }
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {a},
                       [ia, m, n, sm = std::move(sm)](Tape& tp, std::size_t self) {
                         const Tensor& g = tp.grad(self);
                         Tensor& ga = tp.grad(ia);
                         for (std::size_t i = 0; i < m; ++i) {
                           double s = 0.0;
                           for (std::size_t j = 0; j < n; ++j) s += g[i * n + j];
                           for (std::size_t j = 0; j < n; ++j)
                             ga[i * n + j] += g[i * n + j] - sm[i * n + j] * s;
                         }
                       });
}

Var mse(Var pred, Var target) {
  const Tensor& P = pred.value();
  const Tensor& T = target.value();
  if (P.shape() != T.shape()) shape_error("mse", P.shape(), T.shape());
  if (P.size() == 0) throw std::invalid_argument("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double d = P[i] - T[i];
    s += d * d;
  }
  const double inv = 1.0 / static_cast<double>(P.size());
  const std::size_t ip = pred.id(), it = target.id();
  return pred.tape().push(Tensor::scalar(s * inv), {pred, target},
                          [ip, it, inv](Tape& tp, std::size_t self) {
                            const double g = tp.grad(self)[0];
                            const Tensor& P = tp.value(ip);
                            const Tensor& T = tp.value(it);
                            const bool gp = tp.requires_grad(ip), gt = tp.requires_grad(it);
                            for (std::size_t i = 0; i < P.size(); ++i) {
                              const double d = 2.0 * (P[i] - T[i]) * inv * g;
                              if (gp) tp.grad(ip)[i] += d;
                              if (gt) tp.grad(it)[i] -= d;
                            }
                          });
}

Var l2_normalize_rows(Var a) {
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor out(Shape{m, n});
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += A[i * n + j] * A[i * n + j];
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) {
      throw std::invalid_argument("l2_normalize_rows: row " + std::to_string(i) +
                                  " has zero norm");
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = A[i * n + j] / norms[i];
  }
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {a},
                       [ia, m, n, norms = std::move(norms)](Tape& tp, std::size_t self) {
                         const Tensor& g = tp.grad(self);
                         const Tensor& y = tp.value(self);
                         Tensor& ga = tp.grad(ia);
                         for (std::size_t i = 0; i < m; ++i) {
                           double dot = 0.0;
                           for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
                           for (std::size_t j = 0; j < n; ++j)
                             ga[i * n + j] += (g[i * n + j] - y[i * n + j] * dot) / norms[i];
                         }
                       });
}

Var cross_entropy(Var logits, std::span<const std::size_t> labels) {
  const Tensor& X = logits.value();
  const std::size_t m = X.rows(), n = X.cols();
  if (labels.size() != m) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(m) + " rows");
  }
  Tensor sm = softmax_values(X);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] >= n) throw std::invalid_argument("cross_entropy: label out of range");
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, X[i * n + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(X[i * n + j] - mx);
    loss -= X[i * n + labels[i]] - mx - std::log(s);
  }
  loss /= static_cast<double>(m);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  const std::size_t ix = logits.id();
  return logits.tape().push(
      Tensor::scalar(loss), {logits},
      [ix, m, n, sm = std::move(sm), lab = std::move(lab)](Tape& tp, std::size_t self) {
        const double g = tp.grad(self)[0] / static_cast<double>(m);
        Tensor& gx = tp.grad(ix);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j)
            gx[i * n + j] += g * (sm[i * n + j] - (j == lab[i] ? 1.0 : 0.0));
      });
}

Var bce_with_logits(Var logits, const Tensor& targets) {
  const Tensor& X = logits.value();
  if (X.size() != targets.size()) shape_error("bce_with_logits", X.shape(), targets.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double x = X[i];
    loss += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  const double inv = 1.0 / static_cast<double>(X.size());
  const std::size_t ix = logits.id();
  return logits.tape().push(Tensor::scalar(loss * inv), {logits},
                            [ix, inv, targets](Tape& tp, std::size_t self) {
                              const double g = tp.grad(self)[0] * inv;
                              const Tensor& X = tp.value(ix);
                              Tensor& gx = tp.grad(ix);
                              for (std::size_t i = 0; i < X.size(); ++i) {
                                const double sig = 1.0 / (1.0 + std::exp(-X[i]));
                                gx[i] += g * (sig - targets[i]);
                              }
                            });
}

}  // namespace ops
}  // namespace mavil
