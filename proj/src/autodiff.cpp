#include "fairgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairgnn/error.hpp"

namespace fairgnn {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::push(Tensor value, std::vector<std::size_t> inputs, Backprop fn) {
#ifndef NDEBUG
  if (!value.all_finite()) throw NonFiniteError("non-finite value produced on tape");
#endif
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](std::size_t i) { return nodes_[i].requires_grad; });
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backprop = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (!n.touched) return Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

Tensor& Tape::grad_ref(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.touched) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.touched = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("backward: variable belongs to another tape");
  const Tensor& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be scalar (1x1), got " + lv.shape_string());
  }
  for (Node& n : nodes_) {
    n.touched = false;
    n.grad = Tensor();
  }
  grad_ref(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.touched || !n.requires_grad || !n.backprop) continue;
    n.backprop(*this, i);
  }
}

void Tape::record_kinks(const Tensor& input) {
  for (double v : input.values()) kinks_.push_back(v > 0 ? 1 : (v < 0 ? -1 : 0));
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) z += (o[c] = std::exp(in[c] - m));
    for (double& v : o) v /= z;
  }
  return out;
}

namespace ops {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::string shapes(const char* kind, const Var& a, const Var& b) {
  return std::string(kind) + ": shape mismatch " + a.value().shape_string() + " vs " +
         b.value().shape_string();
}

Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error("variables belong to different tapes");
  return *a.tape;
}

// Adds `g` into the gradient of node `id` if it participates in differentiation.
void accumulate(Tape& t, std::size_t id, const Tensor& g) {
  if (!t.requires_grad(id)) return;
  auto& dst = t.grad_ref(id).values();
  const auto& src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename F>
Var unary(Var x, Tensor out, F&& local_grad) {
  Tape& t = *x.tape;
  const std::size_t xi = x.id;
  return t.push(std::move(out), {xi},
                [xi, local_grad = std::forward<F>(local_grad)](Tape& tp, std::size_t self) {
                  if (!tp.requires_grad(xi)) return;
                  const Tensor& g = tp.grad_at(self);
                  const Tensor& xv = tp.value(xi);
                  const Tensor& yv = tp.value(self);
                  auto& dst = tp.grad_ref(xi).values();
                  for (std::size_t i = 0; i < dst.size(); ++i)
                    dst[i] += g[i] * local_grad(xv[i], yv[i]);
                });
}

template <typename F>
Tensor map(const Tensor& x, F&& f) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

Tensor scalar(double v) { return Tensor(1, 1, v); }

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require(a.cols() == b.rows(), shapes("matmul", a, b));
  const std::size_t ai = a.id, bi = b.id;
  return t.push(fairgnn::matmul(a.value(), b.value()), {ai, bi},
                [ai, bi](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad_at(self);
                  if (tp.requires_grad(ai))
                    accumulate(tp, ai, fairgnn::matmul(g, tp.value(bi).transpose()));
                  if (tp.requires_grad(bi))
                    accumulate(tp, bi, fairgnn::matmul(tp.value(ai).transpose(), g));
                });
}

Var spmm(std::shared_ptr<const SparseMatrix> s, Var x) {
  require(s->cols() == x.rows(), "spmm: sparse " + std::to_string(s->rows()) + "x" +
                                     std::to_string(s->cols()) + " vs dense " +
                                     x.value().shape_string());
  const std::size_t xi = x.id;
  Tensor out = s->multiply(x.value());
  return x.tape->push(std::move(out), {xi}, [xi, s](Tape& tp, std::size_t self) {
    accumulate(tp, xi, s->multiply_transposed(tp.grad_at(self)));
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require(a.value().same_shape(b.value()), shapes("add", a, b));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const std::size_t ai = a.id, bi = b.id;
  return t.push(std::move(out), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    accumulate(tp, ai, tp.grad_at(self));
    accumulate(tp, bi, tp.grad_at(self));
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require(a.value().same_shape(b.value()), shapes("sub", a, b));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const std::size_t ai = a.id, bi = b.id;
  return t.push(std::move(out), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    accumulate(tp, ai, tp.grad_at(self));
    if (tp.requires_grad(bi)) {
      auto& dst = tp.grad_ref(bi).values();
      const Tensor& g = tp.grad_at(self);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= g[i];
    }
  });
}

Var add_bias(Var x, Var bias) {
  Tape& t = same_tape(x, bias);
  require(bias.rows() == 1 && bias.cols() == x.cols(), shapes("add-bias-row", x, bias));
  Tensor out = x.value();
  const Tensor& b = bias.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += b[c];
  const std::size_t xi = x.id, bi = bias.id;
  return t.push(std::move(out), {xi, bi}, [xi, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    accumulate(tp, xi, g);
    if (tp.requires_grad(bi)) {
      Tensor& db = tp.grad_ref(bi);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) db[c] += g(r, c);
    }
  });
}

Var scale(Var x, double c) {
  return unary(x, map(x.value(), [c](double v) { return c * v; }),
               [c](double, double) { return c; });
}

Var mul_scalar(Var x, Var s) {
  Tape& t = same_tape(x, s);
  require(s.rows() == 1 && s.cols() == 1, shapes("mul-scalar", x, s));
  const double sv = s.value()[0];
  const std::size_t xi = x.id, si = s.id;
  return t.push(map(x.value(), [sv](double v) { return sv * v; }), {xi, si},
                [xi, si](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad_at(self);
                  const double sv = tp.value(si)[0];
                  if (tp.requires_grad(xi)) {
                    auto& dx = tp.grad_ref(xi).values();
                    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += sv * g[i];
                  }
                  if (tp.requires_grad(si)) {
                    const Tensor& xv = tp.value(xi);
                    double acc = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
                    tp.grad_ref(si)[0] += acc;
                  }
                });
}

Var dropout(Var x, const Tensor& mask) {
  require(mask.same_shape(x.value()), "dropout: mask " + mask.shape_string() + " vs input " +
                                          x.value().shape_string());
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const std::size_t xi = x.id;
  return x.tape->push(std::move(out), {xi}, [xi, mask](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    const Tensor& g = tp.grad_at(self);
    auto& dx = tp.grad_ref(xi).values();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * mask[i];
  });
}

Var relu(Var x) {
  x.tape->record_kinks(x.value());
  return unary(x, map(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }),
               [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var x, double slope) {
  x.tape->record_kinks(x.value());
  return unary(x, map(x.value(), [slope](double v) { return v > 0.0 ? v : slope * v; }),
               [slope](double xv, double) { return xv > 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var x) {
  return unary(x, map(x.value(), [](double v) {
                 return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
               }),
               [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return unary(x, map(x.value(), [](double v) { return std::tanh(v); }),
               [](double, double y) { return 1.0 - y * y; });
}

Var abs(Var x) {
  x.tape->record_kinks(x.value());
  return unary(x, map(x.value(), [](double v) { return std::abs(v); }),
               [](double xv, double) { return xv > 0.0 ? 1.0 : (xv < 0.0 ? -1.0 : 0.0); });
}

Var row_softmax(Var x) {
  const std::size_t xi = x.id;
  return x.tape->push(softmax_rows(x.value()), {xi}, [xi](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    const Tensor& g = tp.grad_at(self);
    const Tensor& y = tp.value(self);
    Tensor& dx = tp.grad_ref(xi);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) dx(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat-cols: no inputs");
  Tape& t = *parts.front().tape;
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    require(p.tape == &t, "concat-cols: variables on different tapes");
    require(p.rows() == n, "concat-cols: row count mismatch " + p.value().shape_string());
    ids.push_back(p.id);
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out(n, total);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, off + c) = v(r, c);
    off += v.cols();
  }
  return t.push(std::move(out), ids, [ids, widths](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(ids[k])) {
        Tensor& d = tp.grad_ref(ids[k]);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) d(r, c) += g(r, off + c);
      }
      off += widths[k];
    }
  });
}

Var average(std::span<const Var> parts) {
  require(!parts.empty(), "average: no inputs");
  Tape& t = *parts.front().tape;
  Tensor out(parts.front().rows(), parts.front().cols());
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    require(p.value().same_shape(out), "average: shape mismatch " + p.value().shape_string());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.value()[i];
    ids.push_back(p.id);
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (double& v : out.values()) v *= inv;
  return t.push(std::move(out), ids, [ids, inv](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    for (std::size_t id : ids) {
      if (!tp.requires_grad(id)) continue;
      auto& d = tp.grad_ref(id).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += inv * g[i];
    }
  });
}

Var select_rows(Var x, std::span<const std::size_t> rows) {
  const Tensor& xv = x.value();
  Tensor out(rows.size(), xv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < xv.rows(), "select-rows: row index out of range");
    std::copy(xv.row(rows[i]).begin(), xv.row(rows[i]).end(), out.row(i).begin());
  }
  const std::size_t xi = x.id;
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return x.tape->push(std::move(out), {xi}, [xi, idx](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    const Tensor& g = tp.grad_at(self);
    Tensor& d = tp.grad_ref(xi);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < g.cols(); ++c) d(idx[i], c) += g(i, c);
  });
}

Var select_col(Var x, std::size_t col) {
  const Tensor& xv = x.value();
  require(col < xv.cols(), "select-col: column out of range for " + xv.shape_string());
  Tensor out(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) out[r] = xv(r, col);
  const std::size_t xi = x.id;
  return x.tape->push(std::move(out), {xi}, [xi, col](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    const Tensor& g = tp.grad_at(self);
    Tensor& d = tp.grad_ref(xi);
    for (std::size_t r = 0; r < g.rows(); ++r) d(r, col) += g[r];
  });
}

Var edge_scores(std::shared_ptr<const SparseMatrix> pattern, Var dst, Var src,
                std::span<const double> bias) {
  Tape& t = same_tape(dst, src);
  const std::size_t n = pattern->rows();
  require(dst.rows() == n && dst.cols() == 1 && src.rows() == pattern->cols() && src.cols() == 1,
          shapes("edge-scores", dst, src));
  require(bias.empty() || bias.size() == pattern->nnz(), "edge-scores: bias size != nnz");
  Tensor out(pattern->nnz(), 1);
  const auto& idx = pattern->indices();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = pattern->row_begin(r); k < pattern->row_end(r); ++k)
      out[k] = dst.value()[r] + src.value()[idx[k]] + (bias.empty() ? 0.0 : bias[k]);
  const std::size_t di = dst.id, si = src.id;
  return t.push(std::move(out), {di, si}, [pattern, di, si](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    const auto& idx = pattern->indices();
    const bool need_d = tp.requires_grad(di), need_s = tp.requires_grad(si);
    Tensor* dd = need_d ? &tp.grad_ref(di) : nullptr;
    Tensor* ds = need_s ? &tp.grad_ref(si) : nullptr;
    for (std::size_t r = 0; r < pattern->rows(); ++r)
      for (std::size_t k = pattern->row_begin(r); k < pattern->row_end(r); ++k) {
        if (dd) (*dd)[r] += g[k];
        if (ds) (*ds)[idx[k]] += g[k];
      }
  });
}

Var masked_row_softmax(std::shared_ptr<const SparseMatrix> pattern, Var edge_values) {
  require(edge_values.rows() == pattern->nnz() && edge_values.cols() == 1,
          "masked-row-softmax: expected " + std::to_string(pattern->nnz()) + "x1, got " +
              edge_values.value().shape_string());
  const Tensor& e = edge_values.value();
  Tensor out(e.rows(), 1);
  for (std::size_t r = 0; r < pattern->rows(); ++r) {
    const std::size_t b = pattern->row_begin(r), end = pattern->row_end(r);
    if (b == end) continue;
    double m = e[b];
    for (std::size_t k = b; k < end; ++k) m = std::max(m, e[k]);
    double z = 0.0;
    for (std::size_t k = b; k < end; ++k) z += (out[k] = std::exp(e[k] - m));
    for (std::size_t k = b; k < end; ++k) out[k] /= z;
  }
  const std::size_t ei = edge_values.id;
  return edge_values.tape->push(std::move(out), {ei}, [pattern, ei](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ei)) return;
    const Tensor& g = tp.grad_at(self);
    const Tensor& y = tp.value(self);
    Tensor& d = tp.grad_ref(ei);
    for (std::size_t r = 0; r < pattern->rows(); ++r) {
      const std::size_t b = pattern->row_begin(r), end = pattern->row_end(r);
      double dot = 0.0;
      for (std::size_t k = b; k < end; ++k) dot += g[k] * y[k];
      for (std::size_t k = b; k < end; ++k) d[k] += y[k] * (g[k] - dot);
    }
  });
}

Var spmm_edges(std::shared_ptr<const SparseMatrix> pattern, Var edge_values, Var x) {
  Tape& t = same_tape(edge_values, x);
  require(edge_values.rows() == pattern->nnz() && edge_values.cols() == 1 &&
              x.rows() == pattern->cols(),
          shapes("spmm-edges", edge_values, x));
  const SparseMatrix weighted = pattern->with_values(edge_values.value().values());
  Tensor out = weighted.multiply(x.value());
  const std::size_t ei = edge_values.id, xi = x.id;
  return t.push(std::move(out), {ei, xi}, [pattern, ei, xi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& ev = tp.value(ei);
    const Tensor& xv = tp.value(xi);
    const auto& idx = pattern->indices();
    if (tp.requires_grad(ei)) {
      Tensor& de = tp.grad_ref(ei);
      for (std::size_t r = 0; r < pattern->rows(); ++r)
        for (std::size_t k = pattern->row_begin(r); k < pattern->row_end(r); ++k) {
          double acc = 0.0;
          for (std::size_t c = 0; c < g.cols(); ++c) acc += g(r, c) * xv(idx[k], c);
          de[k] += acc;
        }
    }
    if (tp.requires_grad(xi)) {
      Tensor& dx = tp.grad_ref(xi);
      for (std::size_t r = 0; r < pattern->rows(); ++r)
        for (std::size_t k = pattern->row_begin(r); k < pattern->row_end(r); ++k)
          for (std::size_t c = 0; c < g.cols(); ++c) dx(idx[k], c) += ev[k] * g(r, c);
    }
  });
}

Var row_mean_over_neighbors(const SparseMatrix& adjacency, Var x) {
  std::vector<double> vals = adjacency.values();
  const auto sums = adjacency.row_sums();
  for (std::size_t r = 0; r < adjacency.rows(); ++r)
    for (std::size_t k = adjacency.row_begin(r); k < adjacency.row_end(r); ++k)
      vals[k] /= sums[r];
  return spmm(std::make_shared<const SparseMatrix>(adjacency.with_values(std::move(vals))), x);
}

Var cross_entropy(Var logits, std::span<const int> labels, std::span<const std::size_t> rows) {
  const Tensor& z = logits.value();
  require(labels.size() == z.rows(), "cross-entropy-with-logits: labels size " +
                                         std::to_string(labels.size()) + " vs logits " +
                                         z.shape_string());
  require(!rows.empty(), "cross-entropy-with-logits: empty row set");
  const Tensor p = softmax_rows(z);
  double loss = 0.0;
  for (std::size_t r : rows) {
    const int y = labels[r];
    require(y >= 0 && static_cast<std::size_t>(y) < z.cols(),
            "cross-entropy-with-logits: label out of range at row " + std::to_string(r));
    const auto zr = z.row(r);
    const double m = *std::max_element(zr.begin(), zr.end());
    double lse = 0.0;
    for (double v : zr) lse += std::exp(v - m);
    loss += m + std::log(lse) - zr[static_cast<std::size_t>(y)];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  const std::size_t li = logits.id;
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  std::vector<int> lv(labels.begin(), labels.end());
  return logits.tape->push(scalar(loss * inv), {li},
                           [li, rv, lv, inv, p](Tape& tp, std::size_t self) {
                             if (!tp.requires_grad(li)) return;
                             const double g = tp.grad_at(self)[0] * inv;
                             Tensor& d = tp.grad_ref(li);
                             for (std::size_t r : rv) {
                               for (std::size_t c = 0; c < p.cols(); ++c) {
                                 const double target =
                                     static_cast<int>(c) == lv[r] ? 1.0 : 0.0;
                                 d(r, c) += g * (p(r, c) - target);
                               }
                             }
                           });
}

Var binary_cross_entropy(Var logits, std::span<const double> targets,
                         std::span<const std::size_t> rows) {
  const Tensor& z = logits.value();
  require(z.cols() == 1 && targets.size() == z.rows(),
          "binary-cross-entropy-with-logits: expected n x 1 logits matching targets, got " +
              z.shape_string());
  require(!rows.empty(), "binary-cross-entropy-with-logits: empty row set");
  double loss = 0.0;
  for (std::size_t r : rows) {
    const double x = z[r], y = targets[r];
    // max(x,0) - x*y + log(1 + exp(-|x|))
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  const std::size_t li = logits.id;
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  std::vector<double> tv(targets.begin(), targets.end());
  return logits.tape->push(scalar(loss * inv), {li}, [li, rv, tv, inv](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(li)) return;
    const double g = tp.grad_at(self)[0] * inv;
    const Tensor& z = tp.value(li);
    Tensor& d = tp.grad_ref(li);
    for (std::size_t r : rv) {
      const double x = z[r];
      const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      d[r] += g * (s - tv[r]);
    }
  });
}

Var squared_norm(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v * v;
  const std::size_t xi = x.id;
  return x.tape->push(scalar(s), {xi}, [xi](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    const double g = tp.grad_at(self)[0];
    const Tensor& xv = tp.value(xi);
    auto& d = tp.grad_ref(xi).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * g * xv[i];
  });
}

Var inner_product(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require(a.value().same_shape(b.value()), shapes("inner-product", a, b));
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) s += a.value()[i] * b.value()[i];
  const std::size_t ai = a.id, bi = b.id;
  return t.push(scalar(s), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const double g = tp.grad_at(self)[0];
    if (tp.requires_grad(ai)) {
      auto& d = tp.grad_ref(ai).values();
      const Tensor& bv = tp.value(bi);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * bv[i];
    }
    if (tp.requires_grad(bi)) {
      auto& d = tp.grad_ref(bi).values();
      const Tensor& av = tp.value(ai);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * av[i];
    }
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const std::size_t xi = x.id;
  return x.tape->push(scalar(s), {xi}, [xi](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    const double g = tp.grad_at(self)[0];
    for (double& d : tp.grad_ref(xi).values()) d += g;
  });
}

Var covariance(Var a, Var b, std::span<const std::size_t> rows) {
  Tape& t = same_tape(a, b);
  require(a.cols() == 1 && b.cols() == 1 && a.rows() == b.rows(), shapes("covariance", a, b));
  require(!rows.empty(), "covariance: empty row set");
  const double m = static_cast<double>(rows.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t r : rows) {
    ma += a.value()[r];
    mb += b.value()[r];
  }
  ma /= m;
  mb /= m;
  double c = 0.0;
  for (std::size_t r : rows) c += (a.value()[r] - ma) * (b.value()[r] - mb);
  c /= m;
  const std::size_t ai = a.id, bi = b.id;
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  return t.push(scalar(c), {ai, bi}, [ai, bi, rv, ma, mb, m](Tape& tp, std::size_t self) {
    const double g = tp.grad_at(self)[0] / m;
    const Tensor& av = tp.value(ai);
    const Tensor& bv = tp.value(bi);
    if (tp.requires_grad(ai)) {
      Tensor& d = tp.grad_ref(ai);
      for (std::size_t r : rv) d[r] += g * (bv[r] - mb);
    }
    if (tp.requires_grad(bi)) {
      Tensor& d = tp.grad_ref(bi);
      for (std::size_t r : rv) d[r] += g * (av[r] - ma);
    }
  });
}

Var project_out(Var x, std::shared_ptr<const Tensor> basis) {
  require(basis->rows() == x.rows(), "project-out: basis " + basis->shape_string() +
                                         " vs input " + x.value().shape_string());
  auto apply = [](const Tensor& s, const Tensor& v) {
    Tensor coef = fairgnn::matmul(s.transpose(), v);
    Tensor out = v;
    const Tensor sc = fairgnn::matmul(s, coef);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= sc[i];
    return out;
  };
  const std::size_t xi = x.id;
  return x.tape->push(apply(*basis, x.value()), {xi},
                      [xi, basis, apply](Tape& tp, std::size_t self) {
                        if (tp.requires_grad(xi)) accumulate(tp, xi, apply(*basis, tp.grad_at(self)));
                      });
}

}  // namespace ops
}  // namespace fairgnn
