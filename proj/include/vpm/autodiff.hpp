#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpm::ad {

// Dense row-major tensor of doubles. Shapes stay tiny here (25x25 images,
// feature vectors of a few hundred entries), so a flat vector is enough.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    v.assign(static_cast<std::size_t>(count(shape)), fill);
  }

  static long count(const std::vector<int>& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor scalar(double x) {
    Tensor t({1});
    t.v[0] = x;
    return t;
  }
  static Tensor vec(std::vector<double> data) {
    Tensor t;
    t.shape = {static_cast<int>(data.size())};
    t.v = std::move(data);
    return t;
  }

  int size() const { return static_cast<int>(v.size()); }
  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
  bool finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

// Reverse-mode tape. Every operation appends a node holding its value and a
// closure that routes the node's gradient to its parents. Parameters are
// leaves bound to external (value, gradient) storage so one tape can be
// rebuilt per minibatch while the parameters persist.
class Tape {
public:
  using Ref = std::int32_t;

  Ref input(Tensor t) {
    nodes_.push_back(Node{std::move(t), {}, nullptr, nullptr});
    return last();
  }

  Ref param(Tensor* value, Tensor* grad) {
    nodes_.push_back(Node{Tensor{}, {}, nullptr, grad});
    nodes_.back().external = value;
    return last();
  }

  const Tensor& val(Ref r) const {
    const Node& n = nodes_[r];
    return n.external ? *n.external : n.value;
  }

  Tensor& grad(Ref r) { return nodes_[r].grad; }

  std::size_t size() const { return nodes_.size(); }

  // ---- elementwise and reshaping ----------------------------------------

  Ref add(Ref a, Ref b) {
    check_same_shape(a, b, "add");
    Tensor out = val(a);
    for (int i = 0; i < out.size(); ++i) out[i] += val(b)[i];
    return make(std::move(out), [a, b](Tape& t, Ref self) {
      accumulate(t.grad(a), t.grad(self));
      accumulate(t.grad(b), t.grad(self));
    });
  }

  Ref sub(Ref a, Ref b) {
    check_same_shape(a, b, "sub");
    Tensor out = val(a);
    for (int i = 0; i < out.size(); ++i) out[i] -= val(b)[i];
    return make(std::move(out), [a, b](Tape& t, Ref self) {
      accumulate(t.grad(a), t.grad(self));
      for (int i = 0; i < t.grad(self).size(); ++i) t.grad(b)[i] -= t.grad(self)[i];
    });
  }

  Ref mul(Ref a, Ref b) {
    check_same_shape(a, b, "mul");
    Tensor out = val(a);
    for (int i = 0; i < out.size(); ++i) out[i] *= val(b)[i];
    return make(std::move(out), [a, b](Tape& t, Ref self) {
      for (int i = 0; i < t.grad(self).size(); ++i) {
        t.grad(a)[i] += t.grad(self)[i] * t.val(b)[i];
        t.grad(b)[i] += t.grad(self)[i] * t.val(a)[i];
      }
    });
  }

  Ref scale(Ref a, double k) {
    Tensor out = val(a);
    for (auto& x : out.v) x *= k;
    return make(std::move(out), [a, k](Tape& t, Ref self) {
      for (int i = 0; i < t.grad(self).size(); ++i) t.grad(a)[i] += k * t.grad(self)[i];
    });
  }

  Ref add_const(Ref a, double k) {
    Tensor out = val(a);
    for (auto& x : out.v) x += k;
    return make(std::move(out), [a](Tape& t, Ref self) {
      accumulate(t.grad(a), t.grad(self));
    });
  }

  Ref neg(Ref a) { return scale(a, -1.0); }

  Ref exp(Ref a) {
    Tensor out = val(a);
    for (auto& x : out.v) x = std::exp(x);
    return make(std::move(out), [a](Tape& t, Ref self) {
      for (int i = 0; i < t.grad(self).size(); ++i)
        t.grad(a)[i] += t.grad(self)[i] * t.val(self)[i];
    });
  }

  Ref relu(Ref a) {
    Tensor out = val(a);
    for (auto& x : out.v) x = std::max(0.0, x);
    return make(std::move(out), [a](Tape& t, Ref self) {
      for (int i = 0; i < t.grad(self).size(); ++i)
        if (t.val(a)[i] > 0.0) t.grad(a)[i] += t.grad(self)[i];
    });
  }

  Ref leaky_relu(Ref a, double slope) {
    Tensor out = val(a);
    for (auto& x : out.v) x = x >= 0.0 ? x : slope * x;
    return make(std::move(out), [a, slope](Tape& t, Ref self) {
      for (int i = 0; i < t.grad(self).size(); ++i)
        t.grad(a)[i] += t.grad(self)[i] * (t.val(a)[i] >= 0.0 ? 1.0 : slope);
    });
  }

  Ref clamp(Ref a, double lo, double hi) {
    Tensor out = val(a);
    for (auto& x : out.v) x = std::min(hi, std::max(lo, x));
    return make(std::move(out), [a, lo, hi](Tape& t, Ref self) {
      for (int i = 0; i < t.grad(self).size(); ++i) {
        const double x = t.val(a)[i];
        if (x > lo && x < hi) t.grad(a)[i] += t.grad(self)[i];
      }
    });
  }

  // Elementwise min; gradient follows the selected branch (ties go to a).
  Ref minimum(Ref a, Ref b) {
    check_same_shape(a, b, "minimum");
    Tensor out = val(a);
    for (int i = 0; i < out.size(); ++i) out[i] = std::min(out[i], val(b)[i]);
    return make(std::move(out), [a, b](Tape& t, Ref self) {
      for (int i = 0; i < t.grad(self).size(); ++i) {
        if (t.val(a)[i] <= t.val(b)[i]) t.grad(a)[i] += t.grad(self)[i];
        else t.grad(b)[i] += t.grad(self)[i];
      }
    });
  }

  Ref concat(Ref a, Ref b) {
    Tensor out({val(a).size() + val(b).size()});
    std::copy(val(a).v.begin(), val(a).v.end(), out.v.begin());
    std::copy(val(b).v.begin(), val(b).v.end(), out.v.begin() + val(a).size());
    return make(std::move(out), [a, b](Tape& t, Ref self) {
      const int na = t.val(a).size();
      for (int i = 0; i < na; ++i) t.grad(a)[i] += t.grad(self)[i];
      for (int i = 0; i < t.val(b).size(); ++i) t.grad(b)[i] += t.grad(self)[na + i];
    });
  }

  Ref pick(Ref a, int index) {
    Tensor out = Tensor::scalar(val(a)[index]);
    return make(std::move(out), [a, index](Tape& t, Ref self) {
      t.grad(a)[index] += t.grad(self)[0];
    });
  }

  Ref stack(std::span<const Ref> scalars) {
    Tensor out({static_cast<int>(scalars.size())});
    for (std::size_t i = 0; i < scalars.size(); ++i) out[static_cast<int>(i)] = val(scalars[i])[0];
    std::vector<Ref> parents(scalars.begin(), scalars.end());
    return make(std::move(out), [parents](Tape& t, Ref self) {
      for (std::size_t i = 0; i < parents.size(); ++i)
        t.grad(parents[i])[0] += t.grad(self)[static_cast<int>(i)];
    });
  }

  Ref sum(Ref a) {
    double s = 0.0;
    for (double x : val(a).v) s += x;
    return make(Tensor::scalar(s), [a](Tape& t, Ref self) {
      for (int i = 0; i < t.grad(a).size(); ++i) t.grad(a)[i] += t.grad(self)[0];
    });
  }

  Ref mean(Ref a) { return scale(sum(a), 1.0 / val(a).size()); }

  // ---- linear algebra ----------------------------------------------------

  Ref dot(Ref a, Ref b) {
    check_same_shape(a, b, "dot");
    double s = 0.0;
    for (int i = 0; i < val(a).size(); ++i) s += val(a)[i] * val(b)[i];
    return make(Tensor::scalar(s), [a, b](Tape& t, Ref self) {
      const double g = t.grad(self)[0];
      for (int i = 0; i < t.val(a).size(); ++i) {
        t.grad(a)[i] += g * t.val(b)[i];
        t.grad(b)[i] += g * t.val(a)[i];
      }
    });
  }

  // W: [out, in], x: [in] -> [out]
  Ref matvec(Ref W, Ref x) {
    const Tensor& w = val(W);
    const Tensor& xv = val(x);
    if (w.shape.size() != 2 || w.shape[1] != xv.size())
      throw std::invalid_argument("matvec: shape mismatch");
    const int rows = w.shape[0], cols = w.shape[1];
    Tensor out({rows});
    for (int r = 0; r < rows; ++r) {
      double s = 0.0;
      for (int c = 0; c < cols; ++c) s += w.v[r * cols + c] * xv.v[c];
      out[r] = s;
    }
    return make(std::move(out), [W, x, rows, cols](Tape& t, Ref self) {
      const Tensor& w = t.val(W);
      const Tensor& xv = t.val(x);
      for (int r = 0; r < rows; ++r) {
        const double g = t.grad(self)[r];
        if (g == 0.0) continue;
        for (int c = 0; c < cols; ++c) {
          t.grad(W)[r * cols + c] += g * xv.v[c];
          t.grad(x)[c] += g * w.v[r * cols + c];
        }
      }
    });
  }

  // W x + b
  Ref linear(Ref W, Ref b, Ref x) { return add(matvec(W, x), b); }

  // x: [C,H,W], w: [O,C,k,k], b: [O], valid padding.
  Ref conv2d(Ref Wt, Ref b, Ref x, int stride) {
    const Tensor& w = val(Wt);
    const Tensor& xv = val(x);
    if (w.shape.size() != 4 || xv.shape.size() != 3 || w.shape[1] != xv.shape[0])
      throw std::invalid_argument("conv2d: shape mismatch");
    const int O = w.shape[0], C = w.shape[1], K = w.shape[2];
    const int H = xv.shape[1], Win = xv.shape[2];
    const int OH = (H - K) / stride + 1, OW = (Win - K) / stride + 1;
    if (OH < 1 || OW < 1) throw std::invalid_argument("conv2d: kernel larger than input");

    Tensor out({O, OH, OW});
    for (int o = 0; o < O; ++o)
      for (int i = 0; i < OH; ++i)
        for (int j = 0; j < OW; ++j) {
          double s = val(b)[o];
          for (int c = 0; c < C; ++c)
            for (int u = 0; u < K; ++u)
              for (int v = 0; v < K; ++v)
                s += w.v[((o * C + c) * K + u) * K + v] *
                     xv.v[(c * H + i * stride + u) * Win + j * stride + v];
          out.v[(o * OH + i) * OW + j] = s;
        }
    return make(std::move(out),
                [Wt, b, x, stride, O, C, K, H, Win, OH, OW](Tape& t, Ref self) {
      const Tensor& w = t.val(Wt);
      const Tensor& xv = t.val(x);
      for (int o = 0; o < O; ++o)
        for (int i = 0; i < OH; ++i)
          for (int j = 0; j < OW; ++j) {
            const double g = t.grad(self).v[(o * OH + i) * OW + j];
            if (g == 0.0) continue;
            t.grad(b)[o] += g;
            for (int c = 0; c < C; ++c)
              for (int u = 0; u < K; ++u)
                for (int v = 0; v < K; ++v) {
                  t.grad(Wt).v[((o * C + c) * K + u) * K + v] +=
                      g * xv.v[(c * H + i * stride + u) * Win + j * stride + v];
                  t.grad(x).v[(c * H + i * stride + u) * Win + j * stride + v] +=
                      g * w.v[((o * C + c) * K + u) * K + v];
                }
          }
    });
  }

  // ---- softmax family ----------------------------------------------------

  Ref softmax(Ref a) {
    const Tensor& x = val(a);
    double mx = x[0];
    for (double v : x.v) mx = std::max(mx, v);
    Tensor out = x;
    double sum = 0.0;
    for (auto& v : out.v) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : out.v) v /= sum;
    return make(std::move(out), [a](Tape& t, Ref self) {
      const Tensor& y = t.val(self);
      double gy = 0.0;
      for (int i = 0; i < y.size(); ++i) gy += t.grad(self)[i] * y[i];
      for (int i = 0; i < y.size(); ++i)
        t.grad(a)[i] += y[i] * (t.grad(self)[i] - gy);
    });
  }

  Ref log_softmax(Ref a) {
    const Tensor& x = val(a);
    double mx = x[0];
    for (double v : x.v) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : x.v) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    Tensor out = x;
    for (auto& v : out.v) v -= lse;
    return make(std::move(out), [a](Tape& t, Ref self) {
      const Tensor& ls = t.val(self);
      double gsum = 0.0;
      for (int i = 0; i < ls.size(); ++i) gsum += t.grad(self)[i];
      for (int i = 0; i < ls.size(); ++i)
        t.grad(a)[i] += t.grad(self)[i] - std::exp(ls[i]) * gsum;
    });
  }

  // Sum_j weights[j] * vectors[j]; all vectors share one shape.
  Ref weighted_sum(std::span<const Ref> vectors, Ref weights) {
    if (vectors.size() != static_cast<std::size_t>(val(weights).size()))
      throw std::invalid_argument("weighted_sum: weight count mismatch");
    Tensor out(val(vectors[0]).shape);
    for (std::size_t j = 0; j < vectors.size(); ++j) {
      const double wj = val(weights)[static_cast<int>(j)];
      for (int i = 0; i < out.size(); ++i) out[i] += wj * val(vectors[j])[i];
    }
    std::vector<Ref> parents(vectors.begin(), vectors.end());
    return make(std::move(out), [parents, weights](Tape& t, Ref self) {
      for (std::size_t j = 0; j < parents.size(); ++j) {
        const double wj = t.val(weights)[static_cast<int>(j)];
        double dw = 0.0;
        for (int i = 0; i < t.grad(self).size(); ++i) {
          t.grad(parents[j])[i] += wj * t.grad(self)[i];
          dw += t.grad(self)[i] * t.val(parents[j])[i];
        }
        t.grad(weights)[static_cast<int>(j)] += dw;
      }
    });
  }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Parameter
  // leaves accumulate into their bound external gradient tensors.
  void backward(Ref loss) {
    if (val(loss).size() != 1) throw std::invalid_argument("backward needs a scalar loss");
    for (auto& n : nodes_) {
      const Tensor& v = n.external ? *n.external : n.value;
      n.grad = Tensor(v.shape);
    }
    nodes_[loss].grad[0] = 1.0;
    for (Ref r = loss; r >= 0; --r) {
      Node& n = nodes_[r];
      if (n.back) n.back(*this, r);
      if (n.ext_grad) accumulate(*n.ext_grad, n.grad);
    }
  }

private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, Ref)> back;
    Tensor* ext_grad = nullptr;
    const Tensor* external = nullptr;
  };

  Ref last() const { return static_cast<Ref>(nodes_.size() - 1); }

  Ref make(Tensor value, std::function<void(Tape&, Ref)> back) {
    nodes_.push_back(Node{std::move(value), {}, std::move(back), nullptr});
    return last();
  }

  void check_same_shape(Ref a, Ref b, const char* op) const {
    if (val(a).shape != val(b).shape)
      throw std::invalid_argument(std::string(op) + ": operand shapes differ");
  }

  static void accumulate(Tensor& dst, const Tensor& src) {
    for (int i = 0; i < dst.size(); ++i) dst.v[i] += src.v[i];
  }

  std::vector<Node> nodes_;
};

}  // namespace vpm::ad
