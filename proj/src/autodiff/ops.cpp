#include "cyclone/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "cyclone/error.hpp"

namespace cyclone::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.values().data(), Eigen::Index(t.dim(0)), Eigen::Index(t.dim(1)));
}

MatMap as_matrix(Tensor& t) {
  return MatMap(t.values().data(), Eigen::Index(t.dim(0)), Eigen::Index(t.dim(1)));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), Errc::dimension,
          [&] { return std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
              to_string(b.shape()); });
}

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  require(axis < shape.size(), Errc::dimension,
          [&] { return "axis " + std::to_string(axis) + " out of range for " + to_string(shape); });
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void add_into(Tensor* dst, std::span<const double> src, double k = 1.0) {
  if (dst == nullptr) return;
  auto d = dst->values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += k * src[i];
}

template <typename F, typename DF>
Var unary(Var x, OpKind kind, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return x.graph->record(kind, {x}, std::move(out), [x, df](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_buffer(x);
    if (!gx) return;
    const Tensor& xv = g.value(x);
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += go[i] * df(xv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(0), Errc::dimension,
          [&] { return "matmul: incompatible shapes " + to_string(av.shape()) + " and " +
              to_string(bv.shape()); });
  Tensor out({av.dim(0), bv.dim(1)});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  return a.graph->record(OpKind::matmul, {a, b}, std::move(out), [a, b](Graph& g, const Tensor& go) {
    if (Tensor* ga = g.grad_buffer(a)) {
      as_matrix(*ga).noalias() += as_matrix(go) * as_matrix(g.value(b)).transpose();
    }
    if (Tensor* gb = g.grad_buffer(b)) {
      as_matrix(*gb).noalias() += as_matrix(g.value(a)).transpose() * as_matrix(go);
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  add_into(&out, b.value().values());
  return a.graph->record(OpKind::add, {a, b}, std::move(out), [a, b](Graph& g, const Tensor& go) {
    add_into(g.grad_buffer(a), go.values());
    add_into(g.grad_buffer(b), go.values());
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  add_into(&out, b.value().values(), -1.0);
  return a.graph->record(OpKind::sub, {a, b}, std::move(out), [a, b](Graph& g, const Tensor& go) {
    add_into(g.grad_buffer(a), go.values());
    add_into(g.grad_buffer(b), go.values(), -1.0);
  });
}

Var mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.graph->record(OpKind::mul, {a, b}, std::move(out), [a, b](Graph& g, const Tensor& go) {
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    if (Tensor* ga = g.grad_buffer(a)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * bv[i];
    }
    if (Tensor* gb = g.grad_buffer(b)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i] * av[i];
    }
  });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (auto& v : out.values()) v *= factor;
  return x.graph->record(OpKind::scale, {x}, std::move(out), [x, factor](Graph& g, const Tensor& go) {
    add_into(g.grad_buffer(x), go.values(), factor);
  });
}

Var add_scalar(Var x, double offset) {
  Tensor out = x.value();
  for (auto& v : out.values()) v += offset;
  return x.graph->record(OpKind::add_scalar, {x}, std::move(out), [x](Graph& g, const Tensor& go) {
    add_into(g.grad_buffer(x), go.values());
  });
}

Var add_bias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require(xv.rank() >= 1 && bv.size() == xv.shape().back(), Errc::dimension,
          [&] { return "add_bias: bias " + to_string(bv.shape()) + " does not match trailing axis of " +
              to_string(xv.shape()); });
  const std::size_t n = bv.size();
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % n];
  return x.graph->record(OpKind::add_bias, {x, bias}, std::move(out),
                         [x, bias, n](Graph& g, const Tensor& go) {
                           add_into(g.grad_buffer(x), go.values());
                           if (Tensor* gb = g.grad_buffer(bias)) {
                             for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i % n] += go[i];
                           }
                         });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = x.value();
  require(xv.rank() >= 1, Errc::dimension, "layer_norm: rank-0 input");
  const std::size_t n = xv.shape().back();
  require(gamma.value().size() == n && beta.value().size() == n, Errc::dimension,
          [&] { return "layer_norm: gain/bias " + to_string(gamma.value().shape()) + "/" +
              to_string(beta.value().shape()) + " do not match " + to_string(xv.shape()); });
  const std::size_t rows = xv.size() / n;
  auto normalized = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.values().data() + r * n;
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += row[i];
    mu /= double(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= double(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t i = 0; i < n; ++i) {
      const double xh = (row[i] - mu) * inv;
      (*normalized)[r * n + i] = xh;
      out[r * n + i] = gv[i] * xh + bv[i];
    }
  }
  return x.graph->record(
      OpKind::layer_norm, {x, gamma, beta}, std::move(out),
      [x, gamma, beta, n, rows, normalized, inv_std](Graph& g, const Tensor& go) {
        const Tensor& gv = g.value(gamma);
        const auto& xh = *normalized;
        if (Tensor* gg = g.grad_buffer(gamma)) {
          for (std::size_t k = 0; k < go.size(); ++k) (*gg)[k % n] += go[k] * xh[k];
        }
        if (Tensor* gb = g.grad_buffer(beta)) {
          for (std::size_t k = 0; k < go.size(); ++k) (*gb)[k % n] += go[k];
        }
        Tensor* gx = g.grad_buffer(x);
        if (!gx) return;
        for (std::size_t r = 0; r < rows; ++r) {
          double sum_d = 0.0, sum_dx = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const double d = go[r * n + i] * gv[i];
            sum_d += d;
            sum_dx += d * xh[r * n + i];
          }
          const double inv = (*inv_std)[r];
          for (std::size_t i = 0; i < n; ++i) {
            const double d = go[r * n + i] * gv[i];
            (*gx)[r * n + i] +=
                inv / double(n) * (double(n) * d - sum_d - xh[r * n + i] * sum_dx);
          }
        }
      });
}

Var gelu(Var x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, OpKind::gelu, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt_2pi](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

Var sigmoid(Var x) {
  auto f = [](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  };
  return unary(x, OpKind::sigmoid, f, [f](double v) {
    const double s = f(v);
    return s * (1.0 - s);
  });
}

Var tanh(Var x) {
  return unary(
      x, OpKind::tanh, [](double v) { return std::tanh(v); },
      [](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.graph->record(OpKind::reshape, {x}, std::move(out), [x](Graph& g, const Tensor& go) {
    add_into(g.grad_buffer(x), go.values());
  });
}

Var transpose(Var x) {
  const Tensor& xv = x.value();
  require(xv.rank() == 2, Errc::dimension, [&] { return "transpose: rank-2 input required, got " +
                                               to_string(xv.shape()); });
  Tensor out({xv.dim(1), xv.dim(0)});
  as_matrix(out) = as_matrix(xv).transpose();
  return x.graph->record(OpKind::transpose, {x}, std::move(out), [x](Graph& g, const Tensor& go) {
    if (Tensor* gx = g.grad_buffer(x)) as_matrix(*gx) += as_matrix(go).transpose();
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  require(!parts.empty(), Errc::contract, "concat: no operands");
  const Shape& first = parts.front().shape();
  Shape out_shape = first;
  std::vector<std::size_t> extents;
  out_shape.at(axis) = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool compatible = s.size() == first.size();
    for (std::size_t i = 0; compatible && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) compatible = false;
    }
    require(compatible, Errc::dimension, [&] { return "concat: shape mismatch " + to_string(first) +
                                             " vs " + to_string(s); });
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit split = split_at(out_shape, axis);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    const std::size_t block = extents[p] * split.inner;
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(v.values().data() + o * block, block,
                  out.values().data() + o * split.extent * split.inner + offset);
    }
    offset += block;
  }
  Graph* graph = parts.front().graph;
  return graph->record(OpKind::concat, parts, std::move(out),
                       [parts, extents, split](Graph& g, const Tensor& go) {
                         std::size_t offset = 0;
                         for (std::size_t p = 0; p < parts.size(); ++p) {
                           const std::size_t block = extents[p] * split.inner;
                           if (Tensor* gp = g.grad_buffer(parts[p])) {
                             for (std::size_t o = 0; o < split.outer; ++o) {
                               const double* src = go.values().data() +
                                                   o * split.extent * split.inner + offset;
                               double* dst = gp->values().data() + o * block;
                               for (std::size_t k = 0; k < block; ++k) dst[k] += src[k];
                             }
                           }
                           offset += block;
                         }
                       });
}

Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& in_shape = x.shape();
  const AxisSplit split = split_at(in_shape, axis);
  require(length > 0 && start + length <= split.extent, Errc::dimension,
          [&] { return "slice: [" + std::to_string(start) + ", +" + std::to_string(length) +
              ") out of range for " + to_string(in_shape); });
  Shape out_shape = in_shape;
  out_shape[axis] = length;
  Tensor out(out_shape);
  const std::size_t block = length * split.inner;
  const Tensor& xv = x.value();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(xv.values().data() + (o * split.extent + start) * split.inner, block,
                out.values().data() + o * block);
  }
  return x.graph->record(OpKind::slice, {x}, std::move(out),
                         [x, split, start, block](Graph& g, const Tensor& go) {
                           Tensor* gx = g.grad_buffer(x);
                           if (!gx) return;
                           for (std::size_t o = 0; o < split.outer; ++o) {
                             double* dst = gx->values().data() +
                                           (o * split.extent + start) * split.inner;
                             const double* src = go.values().data() + o * block;
                             for (std::size_t k = 0; k < block; ++k) dst[k] += src[k];
                           }
                         });
}

Var mean_axis(Var x, std::size_t axis) {
  const AxisSplit split = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  Tensor out(out_shape);
  const Tensor& xv = x.value();
  const double inv = 1.0 / double(split.extent);
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t j = 0; j < split.extent; ++j) {
      const double* src = xv.values().data() + (o * split.extent + j) * split.inner;
      double* dst = out.values().data() + o * split.inner;
      for (std::size_t i = 0; i < split.inner; ++i) dst[i] += src[i];
    }
  }
  for (auto& v : out.values()) v *= inv;
  return x.graph->record(OpKind::mean_axis, {x}, std::move(out),
                         [x, split, inv](Graph& g, const Tensor& go) {
                           Tensor* gx = g.grad_buffer(x);
                           if (!gx) return;
                           for (std::size_t o = 0; o < split.outer; ++o) {
                             for (std::size_t j = 0; j < split.extent; ++j) {
                               double* dst = gx->values().data() +
                                             (o * split.extent + j) * split.inner;
                               const double* src = go.values().data() + o * split.inner;
                               for (std::size_t i = 0; i < split.inner; ++i) dst[i] += inv * src[i];
                             }
                           }
                         });
}

Var gather_rows(Var table, std::span<const std::size_t> rows) {
  const Tensor& tv = table.value();
  require(tv.rank() == 2, Errc::dimension,
          [&] { return "gather_rows: rank-2 table required, got " + to_string(tv.shape()); });
  require(!rows.empty(), Errc::contract, "gather_rows: empty index set");
  const std::size_t d = tv.dim(1);
  std::vector<std::size_t> index(rows.begin(), rows.end());
  Tensor out({index.size(), d});
  for (std::size_t r = 0; r < index.size(); ++r) {
    require(index[r] < tv.dim(0), Errc::contract,
            [&] { return "gather_rows: row " + std::to_string(index[r]) + " out of range for " +
                to_string(tv.shape()); });
    std::copy_n(tv.values().data() + index[r] * d, d, out.values().data() + r * d);
  }
  return table.graph->record(OpKind::gather_rows, {table}, std::move(out),
                             [table, index = std::move(index), d](Graph& g, const Tensor& go) {
                               Tensor* gt = g.grad_buffer(table);
                               if (!gt) return;
                               for (std::size_t r = 0; r < index.size(); ++r) {
                                 double* dst = gt->values().data() + index[r] * d;
                                 const double* src = go.values().data() + r * d;
                                 for (std::size_t k = 0; k < d; ++k) dst[k] += src[k];
                               }
                             });
}

Var gather(Var x, std::vector<std::size_t> index, Shape shape) {
  const Tensor& xv = x.value();
  require(numel(shape) == index.size(), Errc::dimension,
          [&] { return "gather: " + std::to_string(index.size()) + " indices for shape " + to_string(shape); });
  Tensor out(std::move(shape));
  for (std::size_t k = 0; k < index.size(); ++k) {
    require(index[k] < xv.size(), Errc::contract, "gather: index out of range");
    out[k] = xv[index[k]];
  }
  auto shared = std::make_shared<std::vector<std::size_t>>(std::move(index));
  return x.graph->record(OpKind::gather, {x}, std::move(out), [x, shared](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_buffer(x);
    if (!gx) return;
    const auto& idx = *shared;
    for (std::size_t k = 0; k < idx.size(); ++k) (*gx)[idx[k]] += go[k];
  });
}

Var softmax(Var x, std::size_t axis) {
  const AxisSplit split = split_at(x.shape(), axis);
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t i = 0; i < split.inner; ++i) {
      const std::size_t base = o * split.extent * split.inner + i;
      double peak = xv[base];
      for (std::size_t j = 1; j < split.extent; ++j) peak = std::max(peak, xv[base + j * split.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < split.extent; ++j) {
        const double e = std::exp(xv[base + j * split.inner] - peak);
        out[base + j * split.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < split.extent; ++j) out[base + j * split.inner] /= total;
    }
  }
  auto probs = std::make_shared<std::vector<double>>(out.vec());
  return x.graph->record(OpKind::softmax, {x}, std::move(out), [x, probs, split](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_buffer(x);
    if (!gx) return;
    const auto& yv = *probs;
    for (std::size_t o = 0; o < split.outer; ++o) {
      for (std::size_t i = 0; i < split.inner; ++i) {
        const std::size_t base = o * split.extent * split.inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < split.extent; ++j) {
          dot += go[base + j * split.inner] * yv[base + j * split.inner];
        }
        for (std::size_t j = 0; j < split.extent; ++j) {
          const std::size_t k = base + j * split.inner;
          (*gx)[k] += yv[k] * (go[k] - dot);
        }
      }
    }
  });
}

Var softmax(Var x) { return softmax(x, x.shape().size() - 1); }

Var cross_entropy(Var probs, const Tensor& target) {
  const Tensor& pv = probs.value();
  require_same_shape(pv, target, "cross_entropy");
  double loss = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    loss -= target[i] * std::log(std::max(pv[i], kProbFloor));
  }
  return probs.graph->record(OpKind::cross_entropy, {probs}, Tensor::scalar(loss),
                             [probs, target](Graph& g, const Tensor& go) {
                               Tensor* gp = g.grad_buffer(probs);
                               if (!gp) return;
                               const Tensor& pv = g.value(probs);
                               for (std::size_t i = 0; i < pv.size(); ++i) {
                                 if (pv[i] >= kProbFloor) (*gp)[i] -= go[0] * target[i] / pv[i];
                               }
                             });
}

Var softmax_cross_entropy(Var logits, const Tensor& target) {
  const Tensor& zv = logits.value();
  require_same_shape(zv, target, "softmax_cross_entropy");
  const std::size_t k = zv.shape().back();
  const std::size_t rows = zv.size() / k;
  auto probs = std::make_shared<std::vector<double>>(zv.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = zv.values().data() + r * k;
    const double peak = *std::max_element(z, z + k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) total += std::exp(z[i] - peak);
    const double lse = peak + std::log(total);
    for (std::size_t i = 0; i < k; ++i) {
      (*probs)[r * k + i] = std::exp(z[i] - lse);
      loss -= target[r * k + i] * (z[i] - lse);
    }
  }
  return logits.graph->record(OpKind::softmax_cross_entropy, {logits}, Tensor::scalar(loss),
                              [logits, target, probs, k, rows](Graph& g, const Tensor& go) {
                                Tensor* gz = g.grad_buffer(logits);
                                if (!gz) return;
                                for (std::size_t r = 0; r < rows; ++r) {
                                  double mass = 0.0;
                                  for (std::size_t i = 0; i < k; ++i) mass += target[r * k + i];
                                  for (std::size_t i = 0; i < k; ++i) {
                                    const std::size_t j = r * k + i;
                                    (*gz)[j] += go[0] * ((*probs)[j] * mass - target[j]);
                                  }
                                }
                              });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return x.graph->record(OpKind::sum, {x}, Tensor::scalar(total), [x](Graph& g, const Tensor& go) {
    if (Tensor* gx = g.grad_buffer(x)) {
      for (auto& v : gx->values()) v += go[0];
    }
  });
}

Var mean(Var x) {
  const double n = double(x.value().size());
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return x.graph->record(OpKind::mean, {x}, Tensor::scalar(total / n), [x, n](Graph& g, const Tensor& go) {
    if (Tensor* gx = g.grad_buffer(x)) {
      for (auto& v : gx->values()) v += go[0] / n;
    }
  });
}

}  // namespace cyclone::ad
