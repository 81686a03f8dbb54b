#pragma once
// Finite-difference audit of every parameter gradient under all four
// objectives on a small double-precision model. Shared by the gradcheck
// command and the test suite.

#include <algorithm>
#include <string>
#include <vector>

#include "nmtwp/grad_check.hpp"
#include "nmtwp/training.hpp"

namespace nmtwp {

struct GradCheckEntry {
  std::string objective;
  GradCheckResult result;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool pass = false;
};

inline GradCheckReport run_gradcheck_suite(std::uint64_t seed = 7,
                                           double tol = 1e-4) {
  ModelDims dims;
  dims.v_src = dims.v_tgt = 12;
  dims.d_emb = 8;
  dims.d_hid = 16;
  dims.d_att = 16;
  dims.d_readout = 8;
  Rng rng(seed);
  auto m = init_model<double>(dims, rng, true, true);
  m.set_requires_grad(true);
  auto ml = cast_model<long double>(m);

  std::vector<SentencePair> pairs = {
      {{4, 7, 9, 5}, {6, 8, 4, Vocabulary::kEos}},
      {{10, 11}, {9, Vocabulary::kEos}},
  };
  const Batch batch = make_batch(pairs);

  std::vector<Tensor<long double>> mirror;
  for (auto& [name, t] : ml.named_tensors()) mirror.push_back(t);

  GradCheckReport report;
  for (Objective obj :
       {Objective::kBase, Objective::kL1, Objective::kL2, Objective::kL3}) {
    auto res = grad_check_mirror(
        [&](Tape<double>* tape) { return batch_loss(tape, m, batch, obj); },
        [&]() {
          return batch_loss<long double>(nullptr, ml, batch, obj).item();
        },
        m.named_tensors(), mirror, 1e-5);
    report.max_rel_err = std::max(report.max_rel_err, res.max_rel_err);
    report.entries.push_back({objective_name(obj), res});
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace nmtwp
