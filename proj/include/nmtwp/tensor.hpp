#pragma once
// Dense row-major tensors (rank 0..2) with reverse-mode automatic
// differentiation over an explicit operation tape. Float is the working
// precision; the double instantiation exists for finite-difference checks.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nmtwp {

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t checked_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

template <class T>
struct TensorData {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulation; value-sized afterwards
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // tape that currently tracks this node
  std::int64_t node = -1;     // id on that tape
};

// Cheap shared handle: copies alias the same storage.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.d = std::make_shared<TensorData<T>>();
    std::size_t n = checked_numel(shape);
    t.d->shape = std::move(shape);
    t.d->value.assign(n, T(0));
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> vals) {
    std::size_t n = checked_numel(shape);
    if (n != vals.size())
      throw DimensionError("value count " + std::to_string(vals.size()) +
                           " does not fill shape " + shape_str(shape));
    Tensor t;
    t.d = std::make_shared<TensorData<T>>();
    t.d->shape = std::move(shape);
    t.d->value = std::move(vals);
    return t;
  }

  static Tensor vector(std::vector<T> vals) {
    int n = static_cast<int>(vals.size());
    return from({n}, std::move(vals));
  }

  static Tensor scalar(T v) { return from({}, {v}); }

  bool defined() const { return d != nullptr; }
  const Shape& shape() const { return d->shape; }
  int rank() const { return static_cast<int>(d->shape.size()); }
  int dim(int i) const { return d->shape[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return d->value.size(); }
  bool is_scalar() const { return d->shape.empty(); }

  // The handle is shared: storage mutation is allowed through const handles.
  std::vector<T>& data() const { return d->value; }
  T item() const {
    if (numel() != 1) throw DimensionError("item() on non-scalar " + shape_str(d->shape));
    return d->value[0];
  }

  bool requires_grad() const { return d && d->requires_grad; }
  void set_requires_grad(bool b) const { d->requires_grad = b; }
  bool has_grad() const { return d && !d->grad.empty(); }
  std::vector<T>& grad() const { return d->grad; }
  void ensure_grad() const {
    if (d->grad.empty()) d->grad.assign(d->value.size(), T(0));
  }
  void zero_grad() const {
    if (!d->grad.empty()) std::fill(d->grad.begin(), d->grad.end(), T(0));
  }

  std::shared_ptr<TensorData<T>> d;
};

// Records primitive operations (input node ids, output node id, local gradient
// rule). One backward pass per tape; the tape is cleared afterwards.
template <class T>
class Tape {
 public:
  struct Record {
    std::vector<std::int64_t> inputs;
    std::int64_t output = -1;
    std::function<void()> rule;
  };

  Tape() : id_(next_tape_id()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool tracks(const Tensor<T>& t) const {
    return t.defined() && t.d->tape_id == id_ && t.d->node >= 0;
  }
  // True when gradient must flow into t: parameters and tape intermediates.
  bool wants_grad(const Tensor<T>& t) const {
    return t.defined() && (t.d->requires_grad || tracks(t));
  }

  std::int64_t assign_node(const Tensor<T>& t) {
    if (tracks(t)) return t.d->node;
    t.d->tape_id = id_;
    t.d->node = next_id_++;
    return t.d->node;
  }

  void record(const std::vector<Tensor<T>>& inputs, const Tensor<T>& output,
              std::function<void()> rule) {
    if (consumed_) throw std::logic_error("tape already consumed by backward");
    Record rec;
    for (const auto& in : inputs)
      if (wants_grad(in)) rec.inputs.push_back(assign_node(in));
    rec.output = assign_node(output);
    for (std::int64_t in : rec.inputs)
      if (in >= rec.output) throw std::logic_error("tape order violated");
    rec.rule = std::move(rule);
    records_.push_back(std::move(rec));
  }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded rule in reverse order.
  // Gradients accumulate into parameter tensors; callers zero those between
  // passes. A loss that never touched the tape leaves all gradients as-is.
  void backward(Tensor<T>& loss) {
    if (consumed_) throw std::logic_error("tape already consumed by backward");
    if (!loss.defined() || loss.numel() != 1 || loss.rank() != 0)
      throw DimensionError("backward requires a rank-0 scalar loss");
    consumed_ = true;
    if (tracks(loss)) {
      loss.ensure_grad();
      loss.grad()[0] += T(1);
      for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->rule();
    }
    records_.clear();
  }

  std::size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }

 private:
  // Tape identity must outlive address reuse: a fresh stack tape may land at
  // the address of a dead one while tensors still hold stale node ids.
  static std::uint64_t next_tape_id() {
    static std::uint64_t counter = 0;
    return ++counter;
  }

  std::vector<Record> records_;
  std::uint64_t id_;
  std::int64_t next_id_ = 0;
  bool consumed_ = false;
};

namespace detail {

template <class T>
inline bool grad_ready(const Tensor<T>& t) {
  return t.has_grad();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitive operations. Each takes an optional tape; a null tape means pure
// evaluation with no recording.
// ---------------------------------------------------------------------------

// a [m x k] times b ([k x n] matrix or [k] vector).
template <class T>
Tensor<T> matmul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || (b.rank() != 2 && b.rank() != 1))
    throw DimensionError("matmul expects [m x k] by [k x n] or [k], got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1);
  const int n = b.rank() == 2 ? b.dim(1) : 1;
  const int bk = b.dim(0);
  if (bk != k)
    throw DimensionError("matmul inner dimensions disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  Tensor<T> out = b.rank() == 2 ? Tensor<T>::zeros({m, n}) : Tensor<T>::zeros({m});
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (int i = 0; i < m; ++i)
    for (int kk = 0; kk < k; ++kk) {
      const T aik = pa[i * k + kk];
      const T* brow = pb + static_cast<std::size_t>(kk) * n;
      T* orow = po + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  if (tape && (tape->wants_grad(a) || tape->wants_grad(b))) {
    const bool ga = tape->wants_grad(a), gb = tape->wants_grad(b);
    tape->record({a, b}, out, [a, b, out, ga, gb, m, k, n]() mutable {
      if (!detail::grad_ready(out)) return;
      const T* go = out.grad().data();
      if (ga) {  // dA += dC B^T
        a.ensure_grad();
        T* gra = a.grad().data();
        const T* pb2 = b.data().data();
        for (int i = 0; i < m; ++i)
          for (int kk = 0; kk < k; ++kk) {
            T acc = 0;
            const T* gor = go + static_cast<std::size_t>(i) * n;
            const T* brow = pb2 + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) acc += gor[j] * brow[j];
            gra[i * k + kk] += acc;
          }
      }
      if (gb) {  // dB += A^T dC
        b.ensure_grad();
        T* grb = b.grad().data();
        const T* pa2 = a.data().data();
        for (int i = 0; i < m; ++i) {
          const T* gor = go + static_cast<std::size_t>(i) * n;
          for (int kk = 0; kk < k; ++kk) {
            const T aik = pa2[i * k + kk];
            T* gbr = grb + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) gbr[j] += aik * gor[j];
          }
        }
      }
    });
  }
  return out;
}

// H^T a for H [n x d], a [n]: weighted sum of the rows of H.
template <class T>
Tensor<T> matvec_t(Tape<T>* tape, const Tensor<T>& h, const Tensor<T>& a) {
  if (h.rank() != 2 || a.rank() != 1 || h.dim(0) != a.dim(0))
    throw DimensionError("matvec_t expects [n x d] and [n], got " + shape_str(h.shape()) +
                         " and " + shape_str(a.shape()));
  const int n = h.dim(0), d = h.dim(1);
  Tensor<T> out = Tensor<T>::zeros({d});
  const T* ph = h.data().data();
  const T* pa = a.data().data();
  T* po = out.data().data();
  for (int i = 0; i < n; ++i) {
    const T w = pa[i];
    const T* row = ph + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) po[j] += w * row[j];
  }
  if (tape && (tape->wants_grad(h) || tape->wants_grad(a))) {
    const bool gh = tape->wants_grad(h), ga = tape->wants_grad(a);
    tape->record({h, a}, out, [h, a, out, gh, ga, n, d]() mutable {
      if (!detail::grad_ready(out)) return;
      const T* go = out.grad().data();
      if (gh) {
        h.ensure_grad();
        T* g = h.grad().data();
        const T* pa2 = a.data().data();
        for (int i = 0; i < n; ++i) {
          const T w = pa2[i];
          T* row = g + static_cast<std::size_t>(i) * d;
          for (int j = 0; j < d; ++j) row[j] += w * go[j];
        }
      }
      if (ga) {
        a.ensure_grad();
        T* g = a.grad().data();
        const T* ph2 = h.data().data();
        for (int i = 0; i < n; ++i) {
          T acc = 0;
          const T* row = ph2 + static_cast<std::size_t>(i) * d;
          for (int j = 0; j < d; ++j) acc += row[j] * go[j];
          g[i] += acc;
        }
      }
    });
  }
  return out;
}

namespace detail {

template <class T>
inline void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

}  // namespace detail

template <class T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  // Same shape, or [m x n] plus a broadcast [n] bias row.
  const bool broadcast = a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0);
  if (!broadcast) detail::check_same_shape("add", a, b);
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::size_t n = a.numel(), bn = b.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i % bn];
  if (tape && (tape->wants_grad(a) || tape->wants_grad(b))) {
    const bool ga = tape->wants_grad(a), gb = tape->wants_grad(b);
    tape->record({a, b}, out, [a, b, out, ga, gb, n, bn]() mutable {
      if (!detail::grad_ready(out)) return;
      const T* go = out.grad().data();
      if (ga) {
        a.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) a.grad()[i] += go[i];
      }
      if (gb) {
        b.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) b.grad()[i % bn] += go[i];
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> sub(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("sub", a, b);
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (tape && (tape->wants_grad(a) || tape->wants_grad(b))) {
    const bool ga = tape->wants_grad(a), gb = tape->wants_grad(b);
    tape->record({a, b}, out, [a, b, out, ga, gb, n]() mutable {
      if (!detail::grad_ready(out)) return;
      const T* go = out.grad().data();
      if (ga) {
        a.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) a.grad()[i] += go[i];
      }
      if (gb) {
        b.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) b.grad()[i] -= go[i];
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("mul", a, b);
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (tape && (tape->wants_grad(a) || tape->wants_grad(b))) {
    const bool ga = tape->wants_grad(a), gb = tape->wants_grad(b);
    tape->record({a, b}, out, [a, b, out, ga, gb, n]() mutable {
      if (!detail::grad_ready(out)) return;
      const T* go = out.grad().data();
      if (ga) {
        a.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) a.grad()[i] += go[i] * b.data()[i];
      }
      if (gb) {
        b.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) b.grad()[i] += go[i] * a.data()[i];
      }
    });
  }
  return out;
}

// 1 - x, the complement factor of a gated state update.
template <class T>
Tensor<T> sub_from_one(Tape<T>* tape, const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = T(1) - x.data()[i];
  if (tape && tape->wants_grad(x)) {
    tape->record({x}, out, [x, out, n]() mutable {
      if (!detail::grad_ready(out)) return;
      x.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) x.grad()[i] -= out.grad()[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& x, T c) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = c * x.data()[i];
  if (tape && tape->wants_grad(x)) {
    tape->record({x}, out, [x, out, c, n]() mutable {
      if (!detail::grad_ready(out)) return;
      x.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) x.grad()[i] += c * out.grad()[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = T(1) / (T(1) + std::exp(-x.data()[i]));
  if (tape && tape->wants_grad(x)) {
    tape->record({x}, out, [x, out, n]() mutable {
      if (!detail::grad_ready(out)) return;
      x.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const T y = out.data()[i];
        x.grad()[i] += out.grad()[i] * y * (T(1) - y);
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> tanh(Tape<T>* tape, const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(x.data()[i]);
  if (tape && tape->wants_grad(x)) {
    tape->record({x}, out, [x, out, n]() mutable {
      if (!detail::grad_ready(out)) return;
      x.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const T y = out.data()[i];
        x.grad()[i] += out.grad()[i] * (T(1) - y * y);
      }
    });
  }
  return out;
}

// Stable softmax over a vector of logits (max subtraction).
template <class T>
Tensor<T> softmax(Tape<T>* tape, const Tensor<T>& logits) {
  if (logits.rank() != 1 || logits.dim(0) < 1)
    throw DimensionError("softmax expects a non-empty vector, got " + shape_str(logits.shape()));
  const int n = logits.dim(0);
  Tensor<T> out = Tensor<T>::zeros({n});
  T mx = logits.data()[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits.data()[i]);
  T sum = 0;
  for (int i = 0; i < n; ++i) {
    const T e = std::exp(logits.data()[i] - mx);
    out.data()[i] = e;
    sum += e;
  }
  for (int i = 0; i < n; ++i) out.data()[i] /= sum;
  if (tape && tape->wants_grad(logits)) {
    tape->record({logits}, out, [logits, out, n]() mutable {
      if (!detail::grad_ready(out)) return;
      logits.ensure_grad();
      T dotv = 0;
      for (int i = 0; i < n; ++i) dotv += out.grad()[i] * out.data()[i];
      for (int i = 0; i < n; ++i)
        logits.grad()[i] += out.data()[i] * (out.grad()[i] - dotv);
    });
  }
  return out;
}

// Fused log-softmax; keeps log probabilities finite for likelihood losses.
template <class T>
Tensor<T> log_softmax(Tape<T>* tape, const Tensor<T>& logits) {
  if (logits.rank() != 1 || logits.dim(0) < 1)
    throw DimensionError("log_softmax expects a non-empty vector, got " +
                         shape_str(logits.shape()));
  const int n = logits.dim(0);
  Tensor<T> out = Tensor<T>::zeros({n});
  T mx = logits.data()[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits.data()[i]);
  T sum = 0;
  for (int i = 0; i < n; ++i) sum += std::exp(logits.data()[i] - mx);
  const T lse = mx + std::log(sum);
  for (int i = 0; i < n; ++i) out.data()[i] = logits.data()[i] - lse;
  if (tape && tape->wants_grad(logits)) {
    tape->record({logits}, out, [logits, out, n]() mutable {
      if (!detail::grad_ready(out)) return;
      logits.ensure_grad();
      T gsum = 0;
      for (int i = 0; i < n; ++i) gsum += out.grad()[i];
      for (int i = 0; i < n; ++i)
        logits.grad()[i] += out.grad()[i] - std::exp(out.data()[i]) * gsum;
    });
  }
  return out;
}

// Concatenation of vectors (or of matrices along rows with equal widths).
template <class T>
Tensor<T> concat(Tape<T>* tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat of zero parts");
  const int rank = parts[0].rank();
  if (rank != 1 && rank != 2)
    throw DimensionError("concat expects vectors or matrices, got " +
                         shape_str(parts[0].shape()));
  int total = 0;
  const int width = rank == 2 ? parts[0].dim(1) : 1;
  for (const auto& p : parts) {
    if (p.rank() != rank || (rank == 2 && p.dim(1) != width))
      throw DimensionError("concat axis mismatch: " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    total += p.dim(0);
  }
  Tensor<T> out = rank == 1 ? Tensor<T>::zeros({total}) : Tensor<T>::zeros({total, width});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.data().begin() + off);
    off += p.numel();
  }
  bool any = false;
  if (tape)
    for (const auto& p : parts) any = any || tape->wants_grad(p);
  if (tape && any) {
    std::vector<bool> gp;
    for (const auto& p : parts) gp.push_back(tape->wants_grad(p));
    auto parts_copy = parts;
    tape->record(parts, out, [parts_copy, out, gp]() mutable {
      if (!detail::grad_ready(out)) return;
      std::size_t off2 = 0;
      for (std::size_t pi = 0; pi < parts_copy.size(); ++pi) {
        auto& p = parts_copy[pi];
        if (gp[pi]) {
          p.ensure_grad();
          for (std::size_t i = 0; i < p.numel(); ++i) p.grad()[i] += out.grad()[off2 + i];
        }
        off2 += p.numel();
      }
    });
  }
  return out;
}

// Stack n vectors of length d into an [n x d] matrix.
template <class T>
Tensor<T> stack_rows(Tape<T>* tape, const std::vector<Tensor<T>>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows of zero rows");
  const int d = rows[0].dim(0);
  for (const auto& r : rows)
    if (r.rank() != 1 || r.dim(0) != d)
      throw DimensionError("stack_rows row mismatch: " + shape_str(rows[0].shape()) + " vs " +
                           shape_str(r.shape()));
  const int n = static_cast<int>(rows.size());
  Tensor<T> out = Tensor<T>::zeros({n, d});
  for (int i = 0; i < n; ++i)
    std::copy(rows[i].data().begin(), rows[i].data().end(),
              out.data().begin() + static_cast<std::size_t>(i) * d);
  bool any = false;
  if (tape)
    for (const auto& r : rows) any = any || tape->wants_grad(r);
  if (tape && any) {
    std::vector<bool> gr;
    for (const auto& r : rows) gr.push_back(tape->wants_grad(r));
    auto rows_copy = rows;
    tape->record(rows, out, [rows_copy, out, gr, d]() mutable {
      if (!detail::grad_ready(out)) return;
      for (std::size_t i = 0; i < rows_copy.size(); ++i) {
        if (!gr[i]) continue;
        auto& r = rows_copy[i];
        r.ensure_grad();
        for (int j = 0; j < d; ++j) r.grad()[j] += out.grad()[i * d + j];
      }
    });
  }
  return out;
}

// Stack n scalars into a vector.
template <class T>
Tensor<T> stack(Tape<T>* tape, const std::vector<Tensor<T>>& scalars) {
  if (scalars.empty()) throw DimensionError("stack of zero scalars");
  const int n = static_cast<int>(scalars.size());
  Tensor<T> out = Tensor<T>::zeros({n});
  for (int i = 0; i < n; ++i) {
    if (scalars[i].numel() != 1)
      throw DimensionError("stack expects scalars, got " + shape_str(scalars[i].shape()));
    out.data()[i] = scalars[i].data()[0];
  }
  bool any = false;
  if (tape)
    for (const auto& s : scalars) any = any || tape->wants_grad(s);
  if (tape && any) {
    std::vector<bool> gs;
    for (const auto& s : scalars) gs.push_back(tape->wants_grad(s));
    auto sc = scalars;
    tape->record(scalars, out, [sc, out, gs]() mutable {
      if (!detail::grad_ready(out)) return;
      for (std::size_t i = 0; i < sc.size(); ++i) {
        if (!gs[i]) continue;
        sc[i].ensure_grad();
        sc[i].grad()[0] += out.grad()[i];
      }
    });
  }
  return out;
}

// Row i of an [n x d] matrix; the embedding lookup. Backward scatters.
template <class T>
Tensor<T> row(Tape<T>* tape, const Tensor<T>& m, int i) {
  if (m.rank() != 2 || i < 0 || i >= m.dim(0))
    throw DimensionError("row " + std::to_string(i) + " out of range for " +
                         shape_str(m.shape()));
  const int d = m.dim(1);
  Tensor<T> out = Tensor<T>::zeros({d});
  std::copy(m.data().begin() + static_cast<std::size_t>(i) * d,
            m.data().begin() + static_cast<std::size_t>(i + 1) * d, out.data().begin());
  if (tape && tape->wants_grad(m)) {
    tape->record({m}, out, [m, out, i, d]() mutable {
      if (!detail::grad_ready(out)) return;
      m.ensure_grad();
      for (int j = 0; j < d; ++j) m.grad()[static_cast<std::size_t>(i) * d + j] += out.grad()[j];
    });
  }
  return out;
}

// Gather a subset of rows (the sliced output projection).
template <class T>
Tensor<T> take_rows(Tape<T>* tape, const Tensor<T>& m, const std::vector<int>& ids) {
  if (m.rank() != 2) throw DimensionError("take_rows expects a matrix, got " + shape_str(m.shape()));
  if (ids.empty()) throw DimensionError("take_rows of zero rows");
  const int d = m.dim(1);
  for (int i : ids)
    if (i < 0 || i >= m.dim(0))
      throw DimensionError("take_rows id " + std::to_string(i) + " out of range for " +
                           shape_str(m.shape()));
  Tensor<T> out = Tensor<T>::zeros({static_cast<int>(ids.size()), d});
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy(m.data().begin() + static_cast<std::size_t>(ids[r]) * d,
              m.data().begin() + static_cast<std::size_t>(ids[r] + 1) * d,
              out.data().begin() + r * d);
  if (tape && tape->wants_grad(m)) {
    tape->record({m}, out, [m, out, ids, d]() mutable {
      if (!detail::grad_ready(out)) return;
      m.ensure_grad();
      for (std::size_t r = 0; r < ids.size(); ++r)
        for (int j = 0; j < d; ++j)
          m.grad()[static_cast<std::size_t>(ids[r]) * d + j] += out.grad()[r * d + j];
    });
  }
  return out;
}

// Gather vector entries by index.
template <class T>
Tensor<T> take(Tape<T>* tape, const Tensor<T>& v, const std::vector<int>& ids) {
  if (v.rank() != 1) throw DimensionError("take expects a vector, got " + shape_str(v.shape()));
  if (ids.empty()) throw DimensionError("take of zero entries");
  Tensor<T> out = Tensor<T>::zeros({static_cast<int>(ids.size())});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= v.dim(0))
      throw DimensionError("take id " + std::to_string(ids[r]) + " out of range for " +
                           shape_str(v.shape()));
    out.data()[r] = v.data()[ids[r]];
  }
  if (tape && tape->wants_grad(v)) {
    tape->record({v}, out, [v, out, ids]() mutable {
      if (!detail::grad_ready(out)) return;
      v.ensure_grad();
      for (std::size_t r = 0; r < ids.size(); ++r) v.grad()[ids[r]] += out.grad()[r];
    });
  }
  return out;
}

// Single entry of a vector as a rank-0 scalar.
template <class T>
Tensor<T> pick(Tape<T>* tape, const Tensor<T>& v, int i) {
  if (v.rank() != 1 || i < 0 || i >= v.dim(0))
    throw DimensionError("pick " + std::to_string(i) + " out of range for " +
                         shape_str(v.shape()));
  Tensor<T> out = Tensor<T>::scalar(v.data()[i]);
  if (tape && tape->wants_grad(v)) {
    tape->record({v}, out, [v, out, i]() mutable {
      if (!detail::grad_ready(out)) return;
      v.ensure_grad();
      v.grad()[i] += out.grad()[0];
    });
  }
  return out;
}

template <class T>
Tensor<T> sum(Tape<T>* tape, const Tensor<T>& x) {
  T s = 0;
  for (const T v : x.data()) s += v;
  Tensor<T> out = Tensor<T>::scalar(s);
  if (tape && tape->wants_grad(x)) {
    tape->record({x}, out, [x, out]() mutable {
      if (!detail::grad_ready(out)) return;
      x.ensure_grad();
      for (std::size_t i = 0; i < x.numel(); ++i) x.grad()[i] += out.grad()[0];
    });
  }
  return out;
}

template <class T>
Tensor<T> dot(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 1 || b.rank() != 1 || a.dim(0) != b.dim(0))
    throw DimensionError("dot expects equal-length vectors, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  T s = 0;
  for (int i = 0; i < a.dim(0); ++i) s += a.data()[i] * b.data()[i];
  Tensor<T> out = Tensor<T>::scalar(s);
  if (tape && (tape->wants_grad(a) || tape->wants_grad(b))) {
    const bool ga = tape->wants_grad(a), gb = tape->wants_grad(b);
    tape->record({a, b}, out, [a, b, out, ga, gb]() mutable {
      if (!detail::grad_ready(out)) return;
      const T g = out.grad()[0];
      if (ga) {
        a.ensure_grad();
        for (int i = 0; i < a.dim(0); ++i) a.grad()[i] += g * b.data()[i];
      }
      if (gb) {
        b.ensure_grad();
        for (int i = 0; i < b.dim(0); ++i) b.grad()[i] += g * a.data()[i];
      }
    });
  }
  return out;
}

// Mean over the rows of an [n x d] matrix.
template <class T>
Tensor<T> mean_rows(Tape<T>* tape, const Tensor<T>& m) {
  if (m.rank() != 2) throw DimensionError("mean_rows expects a matrix, got " + shape_str(m.shape()));
  const int n = m.dim(0), d = m.dim(1);
  Tensor<T> out = Tensor<T>::zeros({d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.data()[j] += m.data()[static_cast<std::size_t>(i) * d + j];
  for (int j = 0; j < d; ++j) out.data()[j] /= static_cast<T>(n);
  if (tape && tape->wants_grad(m)) {
    tape->record({m}, out, [m, out, n, d]() mutable {
      if (!detail::grad_ready(out)) return;
      m.ensure_grad();
      const T inv = T(1) / static_cast<T>(n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
          m.grad()[static_cast<std::size_t>(i) * d + j] += inv * out.grad()[j];
    });
  }
  return out;
}

// W x + b convenience wrapper.
template <class T>
Tensor<T> affine(Tape<T>* tape, const Tensor<T>& w, const Tensor<T>& x, const Tensor<T>& b) {
  return add(tape, matmul(tape, w, x), b);
}

template <class T>
int argmax(const Tensor<T>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.numel()); ++i)
    if (v.data()[i] > v.data()[best]) best = i;
  return best;
}

}  // namespace nmtwp
