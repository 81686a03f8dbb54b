#pragma once
// Joint objectives over the translation loss and the two prediction losses,
// AdaDelta, inverted dropout, and the epoch loop with pre-train support.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nmtwp/checkpoint.hpp"
#include "nmtwp/corpus.hpp"
#include "nmtwp/model.hpp"
#include "nmtwp/word_prediction.hpp"

namespace nmtwp {

enum class Objective { kBase, kL1, kL2, kL3 };

inline Objective parse_objective(const std::string& name) {
  if (name == "base") return Objective::kBase;
  if (name == "L1") return Objective::kL1;
  if (name == "L2") return Objective::kL2;
  if (name == "L3") return Objective::kL3;
  throw std::invalid_argument("unknown objective " + name +
                              " (expected base, L1, L2 or L3)");
}

inline const char* objective_name(Objective o) {
  switch (o) {
    case Objective::kBase: return "base";
    case Objective::kL1: return "L1";
    case Objective::kL2: return "L2";
    case Objective::kL3: return "L3";
  }
  return "?";
}

inline bool objective_uses_wpe(Objective o) {
  return o == Objective::kL1 || o == Objective::kL3;
}
inline bool objective_uses_wpd(Objective o) {
  return o == Objective::kL2 || o == Objective::kL3;
}

// All components are negated log-likelihood batch means, so lower is better
// and the composite is the plain sum of the present components.
struct LossBreakdown {
  double l_t = 0.0;
  std::optional<double> l_wpe;
  std::optional<double> l_wpd;
  double composite = 0.0;
};

template <class T>
Tensor<T> dropout_mask(Shape shape, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  Tensor<T> m = Tensor<T>::zeros(std::move(shape));
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& v : m.data()) v = rng.uniform() < rate ? T(0) : keep;
  return m;
}

template <class T>
struct Dropout {
  double rate;
  Rng rng;
  Tensor<T> mask(int n) { return dropout_mask<T>({n}, rate, rng); }
};

// Composite loss over one batch. One rollout per sentence feeds the
// translation terms and, when enabled, the per-step suffix prediction terms;
// the encoder output feeds the sentence-level prediction term. Teacher
// forcing throughout. Returns the scalar to minimize.
template <class T>
Tensor<T> batch_loss(Tape<T>* tape, const ModelParams<T>& m, const Batch& batch,
                     Objective obj, Dropout<T>* dropout = nullptr,
                     LossBreakdown* out = nullptr) {
  const bool use_wpe = objective_uses_wpe(obj);
  const bool use_wpd = objective_uses_wpd(obj);
  if (use_wpe && !m.has_wpe)
    throw std::invalid_argument("objective needs the WP_E head but the model has none");
  if (use_wpd && !m.has_wpd)
    throw std::invalid_argument("objective needs the WP_D head but the model has none");

  std::vector<Tensor<T>> lt_sent, wpe_sent, wpd_sent;
  for (int b = 0; b < batch.rows; ++b) {
    const std::vector<int> x = batch.source_row(b);
    const std::vector<int> y = batch.target_row(b);
    const int ny = static_cast<int>(y.size());
    auto enc = encode(tape, m.encoder, x);

    Tensor<T> state = enc.s0;
    int prev = Vocabulary::kBos;
    std::vector<Tensor<T>> lt_terms, wpd_terms;
    for (int j = 1; j <= ny; ++j) {
      Tensor<T> pe = row(tape, m.decoder.emb, prev);
      auto step = decoder_step(tape, m.decoder, state, pe, enc);
      Tensor<T> u = output_readout(tape, m.decoder, step.state, pe, step.att.c);

      Tensor<T> u_t = u;
      if (dropout && dropout->rate > 0.0) {
        Tensor<T> mask = dropout->mask(m.dims.d_readout);
        u_t = mul(tape, u, mask);
      }
      Tensor<T> lp = log_softmax(tape, output_logits(tape, m.decoder, u_t));
      lt_terms.push_back(pick(tape, lp, y[static_cast<std::size_t>(j - 1)]));

      if (use_wpd) {
        // prediction reads the clean readout
        Tensor<T> pu = tanh(tape, affine(tape, m.wpd.W_p, u, m.wpd.b_p));
        Tensor<T> wlp = log_softmax(tape, output_logits(tape, m.decoder, pu));
        std::vector<Tensor<T>> suffix;
        for (int k = j; k <= ny; ++k)
          suffix.push_back(pick(tape, wlp, y[static_cast<std::size_t>(k - 1)]));
        wpd_terms.push_back(
            scale(tape, sum(tape, stack(tape, suffix)), T(1) / T(ny - j + 1)));
      }
      state = step.state;
      prev = y[static_cast<std::size_t>(j - 1)];
    }
    lt_sent.push_back(scale(tape, sum(tape, stack(tape, lt_terms)), T(1) / T(ny)));
    if (use_wpd) wpd_sent.push_back(sum(tape, stack(tape, wpd_terms)));
    if (use_wpe) wpe_sent.push_back(wpe_log_prob(tape, m.wpe, enc, y));
  }

  const T inv_b = T(1) / T(batch.rows);
  Tensor<T> l_t = scale(tape, sum(tape, stack(tape, lt_sent)), -inv_b);
  Tensor<T> total = l_t;
  Tensor<T> l_wpe, l_wpd;
  if (use_wpe) {
    l_wpe = scale(tape, sum(tape, stack(tape, wpe_sent)), -inv_b);
    total = add(tape, total, l_wpe);
  }
  if (use_wpd) {
    l_wpd = scale(tape, sum(tape, stack(tape, wpd_sent)), -inv_b);
    total = add(tape, total, l_wpd);
  }
  if (out) {
    out->l_t = static_cast<double>(l_t.item());
    out->l_wpe = use_wpe ? std::optional<double>(static_cast<double>(l_wpe.item()))
                         : std::nullopt;
    out->l_wpd = use_wpd ? std::optional<double>(static_cast<double>(l_wpd.item()))
                         : std::nullopt;
    out->composite = static_cast<double>(total.item());
  }
  return total;
}

// Translation-only loss value (negated per-sentence token mean, batch mean).
template <class T>
double loss_translation(const ModelParams<T>& m, const Batch& batch) {
  return static_cast<double>(batch_loss<T>(nullptr, m, batch, Objective::kBase).item());
}

template <class T>
class AdaDelta {
 public:
  explicit AdaDelta(std::vector<std::pair<std::string, Tensor<T>>> params,
                    double rho = 0.95, double eps = 1e-6)
      : rho_(static_cast<T>(rho)), eps_(static_cast<T>(eps)) {
    for (auto& [name, t] : params) {
      t.ensure_grad();
      slots_.push_back({name, t, std::vector<T>(t.numel(), T(0)),
                        std::vector<T>(t.numel(), T(0))});
    }
  }

  void zero_grads() {
    for (auto& s : slots_) s.param.zero_grad();
  }

  // Global-norm clip, then the standard running-average update. Gradients
  // are cleared after a successful step.
  void step(double clip) {
    double norm_sq = 0.0;
    for (const auto& s : slots_)
      for (const T g : s.param.grad()) {
        if (!std::isfinite(static_cast<double>(g)))
          throw std::runtime_error("non-finite gradient in " + s.name);
        norm_sq += static_cast<double>(g) * static_cast<double>(g);
      }
    const double norm = std::sqrt(norm_sq);
    const T scale = norm > clip ? static_cast<T>(clip / norm) : T(1);
    for (auto& s : slots_) {
      auto& value = s.param.data();
      auto& grad = s.param.grad();
      for (std::size_t i = 0; i < value.size(); ++i) {
        const T g = grad[i] * scale;
        s.eg2[i] = rho_ * s.eg2[i] + (T(1) - rho_) * g * g;
        const T dx = -std::sqrt(s.edx2[i] + eps_) / std::sqrt(s.eg2[i] + eps_) * g;
        s.edx2[i] = rho_ * s.edx2[i] + (T(1) - rho_) * dx * dx;
        value[i] += dx;
      }
    }
    zero_grads();
  }

  std::size_t size() const { return slots_.size(); }

 private:
  struct Slot {
    std::string name;
    Tensor<T> param;
    std::vector<T> eg2, edx2;
  };
  std::vector<Slot> slots_;
  T rho_, eps_;
};

struct TrainOptions {
  Objective objective = Objective::kBase;
  ModelDims dims;  // ignored when pretrain is set, except as a consistency check
  int batch_size = 32;
  int max_epochs = 10;
  int max_len = 50;
  std::uint64_t seed = 1;
  double dropout = 0.0;
  double clip_norm = 1.0;
  int patience = 3;
  std::string out_dir;
  std::string pretrain;      // checkpoint to fine-tune from
  bool freeze_base = false;  // update only head parameters
};

template <class T>
struct TrainResult {
  ModelParams<T> model;
  std::vector<LossBreakdown> epoch_losses;
  std::vector<double> val_l_t;  // NaN when no validation data
  std::string final_checkpoint;
  std::string best_checkpoint;
  int best_epoch = 0;
};

template <class T>
double validation_l_t(const ModelParams<T>& m,
                      const std::vector<Batch>& batches) {
  double total = 0.0;
  int rows = 0;
  for (const auto& b : batches) {
    LossBreakdown lb;
    (void)batch_loss<T>(nullptr, m, b, Objective::kBase, nullptr, &lb);
    total += lb.l_t * b.rows;
    rows += b.rows;
  }
  return rows ? total / rows : std::numeric_limits<double>::quiet_NaN();
}

template <class T>
TrainResult<T> train(const TrainOptions& opt,
                     const std::vector<SentencePair>& train_pairs,
                     const std::vector<SentencePair>& val_pairs,
                     std::ostream* log = nullptr) {
  if (opt.out_dir.empty()) throw std::invalid_argument("training needs an output directory");
  if (opt.clip_norm <= 0.0) throw std::invalid_argument("gradient clip norm must be positive");
  std::filesystem::create_directories(opt.out_dir);

  const Rng master(opt.seed);
  ModelParams<T> m;
  if (!opt.pretrain.empty()) {
    m = load_model<T>(opt.pretrain);
    if (opt.dims.v_src > 0 && (m.dims.v_src != opt.dims.v_src || m.dims.v_tgt != opt.dims.v_tgt))
      throw std::runtime_error("pretrain checkpoint vocabulary does not match the data");
    if (objective_uses_wpe(opt.objective) && !m.has_wpe) add_wpe_head(m, master);
    if (objective_uses_wpd(opt.objective) && !m.has_wpd) add_wpd_head(m, master);
  } else {
    m = init_model<T>(opt.dims, master, objective_uses_wpe(opt.objective),
                      objective_uses_wpd(opt.objective));
  }

  std::vector<std::pair<std::string, Tensor<T>>> trainable;
  for (auto& [name, t] : m.named_tensors()) {
    if (opt.freeze_base && name.rfind("wpe.", 0) != 0 && name.rfind("wpd.", 0) != 0)
      continue;
    trainable.emplace_back(name, t);
  }
  if (trainable.empty()) throw std::invalid_argument("no trainable parameters");
  AdaDelta<T> optimizer(trainable);

  const std::string log_path = opt.out_dir + "/loss.log";
  const bool fresh_log = !std::filesystem::exists(log_path);
  std::ofstream loss_log(log_path, std::ios::app);
  if (!loss_log) throw std::runtime_error("cannot write loss log " + log_path);
  if (fresh_log) loss_log << "# epoch\tL_T\tL_WPE\tL_WPD\tcomposite\tval_L_T\n";
  auto field = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return std::string(buf);
  };

  Rng val_rng = master.substream("val-batches");
  std::vector<Batch> val_batches =
      val_pairs.empty() ? std::vector<Batch>()
                        : make_batches(val_pairs, opt.batch_size, opt.max_len,
                                       val_rng.next_u64());

  TrainResult<T> result{std::move(m), {}, {}, "", "", 0};
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    Rng shuffle_rng = master.substream("shuffle", static_cast<std::uint64_t>(epoch));
    auto batches = make_batches(train_pairs, opt.batch_size, opt.max_len,
                                shuffle_rng.next_u64());
    if (batches.empty()) throw std::runtime_error("no training pairs within the length limit");
    Dropout<T> dropout{opt.dropout,
                       master.substream("dropout", static_cast<std::uint64_t>(epoch))};

    LossBreakdown epoch_lb;
    double wpe_total = 0, wpd_total = 0;
    int rows = 0;
    for (const auto& batch : batches) {
      Tape<T> tape;
      LossBreakdown lb;
      Tensor<T> loss = batch_loss(&tape, result.model, batch, opt.objective,
                                  opt.dropout > 0.0 ? &dropout : nullptr, &lb);
      if (!std::isfinite(lb.composite))
        throw std::runtime_error("non-finite loss in epoch " + std::to_string(epoch));
      tape.backward(loss);
      optimizer.step(opt.clip_norm);
      epoch_lb.l_t += lb.l_t * batch.rows;
      if (lb.l_wpe) wpe_total += *lb.l_wpe * batch.rows;
      if (lb.l_wpd) wpd_total += *lb.l_wpd * batch.rows;
      epoch_lb.composite += lb.composite * batch.rows;
      rows += batch.rows;
    }
    epoch_lb.l_t /= rows;
    epoch_lb.composite /= rows;
    if (objective_uses_wpe(opt.objective)) epoch_lb.l_wpe = wpe_total / rows;
    if (objective_uses_wpd(opt.objective)) epoch_lb.l_wpd = wpd_total / rows;

    const double val =
        val_batches.empty() ? std::numeric_limits<double>::quiet_NaN()
                            : validation_l_t(result.model, val_batches);
    result.epoch_losses.push_back(epoch_lb);
    result.val_l_t.push_back(val);

    const std::string ckpt =
        opt.out_dir + "/epoch_" + std::to_string(epoch) + ".ckpt";
    save_model(ckpt, result.model);
    result.final_checkpoint = ckpt;

    loss_log << epoch << '\t' << field(epoch_lb.l_t) << '\t' << field(epoch_lb.l_wpe)
             << '\t' << field(epoch_lb.l_wpd) << '\t' << field(epoch_lb.composite)
             << '\t' << field(std::isnan(val) ? std::optional<double>() : std::optional<double>(val))
             << '\n';
    loss_log.flush();
    if (log)
      *log << "epoch " << epoch << " " << objective_name(opt.objective)
           << " composite " << epoch_lb.composite << '\n';

    if (!std::isnan(val)) {
      if (val < best_val) {
        best_val = val;
        result.best_checkpoint = ckpt;
        result.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= opt.patience) {
        break;
      }
    } else {
      result.best_checkpoint = ckpt;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace nmtwp
