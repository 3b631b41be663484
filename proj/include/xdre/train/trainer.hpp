#ifndef XDRE_TRAIN_TRAINER_HPP_
#define XDRE_TRAIN_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xdre/eval/evaluate.hpp"
#include "xdre/model/model.hpp"
#include "xdre/train/optimizer.hpp"

namespace xdre::train {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to continue training exactly where it stopped.
template <class S>
struct TrainState {
  ad::ParamSet<S> params;  // after the last completed epoch
  AdamW<S> optimizer;
  std::string rng;  // serialized shuffle generator
  int epoch = 0;    // completed epochs
  std::vector<double> loss_curve;
  std::vector<double> dev_curve;  // selection score per epoch (empty without dev data)
  ad::ParamSet<S> best;
  int best_epoch = 0;
  double best_score = -1;
};

inline AdamWConfig adamw_config(const TrainConfig& t) { return {t.lr, t.beta1, t.beta2, t.eps, t.weight_decay, t.grad_clip}; }

/// Dev selection score: threshold-swept F1, or micro-F1 when F1 is undefined.
inline double selection_score(const eval::EvalReport& r) { return r.f1 ? *r.f1 : r.micro_f1; }

template <class S>
std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline std::mt19937_64 rng_from_string(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw std::runtime_error("corrupt RNG state in checkpoint");
  return rng;
}

struct EpochInfo {
  int epoch = 0;
  double loss = 0;
  std::optional<double> dev_score;
  bool improved = false;
};

/// Minibatch AdamW on the bag cross-entropy. Bags are shuffled each epoch by
/// a generator seeded from cfg.seed; with `resume` training continues from
/// its parameters, optimizer moments, generator and curves. The model ends
/// up holding the best-scoring parameters (the last ones without dev data).
template <class S>
TrainState<S> train_main(model::Model<S>& m, const data::Dataset& train, const data::Dataset* dev, const TrainConfig& cfg,
                         const TrainState<S>* resume = nullptr,
                         const std::function<void(const TrainState<S>&, const EpochInfo&)>& on_epoch = {}, int workers = 1) {
  if (train.bags.empty()) throw std::invalid_argument("train_main: empty training set");
  TrainState<S> st;
  std::mt19937_64 rng(cfg.seed);
  if (resume) {
    st = *resume;
    m.params() = st.params;
    rng = rng_from_string(st.rng);
    st.optimizer.set_config(adamw_config(cfg));
  } else {
    st.optimizer = AdamW<S>(adamw_config(cfg));
  }
  std::vector<std::size_t> order(train.bags.size());
  const DebiasConfig plain{false, 0.0, 0.0, false, false};

  for (int epoch = st.epoch; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      ad::GradStore<S> grads;
      for (std::size_t i = start; i < end; ++i) {
        const auto& bag = train.bags[order[i]];
        ad::Tape<S> tape;
        const auto f = m.forward(tape, bag);
        ad::Var<S> loss = m.loss(f, bag, cfg.loss_floor);
        const double value = static_cast<double>(loss.value()(0, 0));
        if (!std::isfinite(value)) {
          throw TrainingDiverged("loss became " + std::to_string(value) + " at epoch " + std::to_string(epoch + 1) + " on bag '" + bag.id +
                                 "'; lower train.lr or tighten train.grad_clip");
        }
        tape.backward(loss);
        grads.accumulate(tape, S(1) / static_cast<S>(end - start));
        total += value;
      }
      const S norm = st.optimizer.step(m.params(), grads);
      if (!std::isfinite(static_cast<double>(norm))) {
        throw TrainingDiverged("non-finite gradient norm at epoch " + std::to_string(epoch + 1) + "; lower train.lr");
      }
    }
    EpochInfo info;
    info.epoch = epoch + 1;
    info.loss = total / static_cast<double>(order.size());
    st.loss_curve.push_back(info.loss);
    if (dev && !dev->bags.empty()) {
      const double score = selection_score(eval::evaluate<S>(m, nullptr, *dev, plain, workers));
      st.dev_curve.push_back(score);
      info.dev_score = score;
      if (score > st.best_score) {
        st.best_score = score;
        st.best_epoch = epoch + 1;
        st.best = m.params();
        info.improved = true;
      }
    } else {
      st.best = m.params();
      st.best_epoch = epoch + 1;
      info.improved = true;
    }
    st.epoch = epoch + 1;
    st.params = m.params();
    st.rng = rng_to_string<S>(rng);
    if (on_epoch) on_epoch(st, info);
  }
  if (st.best.size() > 0) m.params() = st.best;
  return st;
}

}  // namespace xdre::train

#endif  // XDRE_TRAIN_TRAINER_HPP_
