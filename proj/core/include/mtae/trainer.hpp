#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mtae/dataset.hpp"
#include "mtae/losses.hpp"
#include "mtae/metrics.hpp"
#include "mtae/model.hpp"
#include "mtae/optimizer.hpp"

namespace mtae {

struct TrainConfig {
  double alpha = 0.4;
  double beta = 0.6;
  double learning_rate = 1e-4;
  int batch_size = 32;
  int patience = 5;
  double lr_floor = 1e-5;
  int max_epochs = 200;
  u64 seed = 1;
  // Fraction of each batch drawn from the auxiliary (emotion-unlabeled) set
  // when one is attached.
  double aux_mix_ratio = 0.5;
  // Update the encoder on log(1 - D(E(x))) as written rather than on the
  // non-saturating -log D(E(x)) form.
  bool literal_generator_loss = false;

  void validate() const;
};

// Per-step component losses. l_c and l_mtae are composites filled by
// compose_step_losses; the identities
//   l_c    == beta * l_e + (1 - beta) * (l_g + l_s)
//   l_mtae == alpha * l_ae + l_c
// hold in same-precision double arithmetic and are auditable from the logs.
struct StepLosses {
  double l_ae = 0.0;
  double l_disc = 0.0;
  double l_gen_adv = 0.0;
  double l_e = 0.0;
  double l_g = 0.0;
  double l_s = 0.0;
  double l_c = 0.0;
  double l_mtae = 0.0;
};

void compose_step_losses(StepLosses& losses, double alpha, double beta);
std::string step_losses_to_json(const StepLosses& losses, i64 step, double lr);
StepLosses step_losses_from_json(const std::string& line);

template <typename T>
struct Batch {
  Tensor<T> x;  // (B, 1, rows, cols)
  std::vector<int> emotion;
  std::vector<int> gender;
  std::vector<int> speaker;

  i64 size() const { return x.shape()[0]; }
};

template <typename T>
Batch<T> make_batch(const SegmentSet& set, const std::vector<i64>& indices);

struct FitResult {
  int best_epoch = 0;   // 0 = initial parameters were never beaten
  double best_ua = 0.0;
  int epochs_run = 0;
  int halvings = 0;
};

// Discriminator class indices: an encoder code is class 0, a prior draw is
// class 1.
inline constexpr int kDiscCode = 0;
inline constexpr int kDiscPrior = 1;

// Three-phase training. The phases are public so audits can byte-diff
// parameter groups around each sub-step; train_step composes them in the
// fixed order recon -> disc -> gen -> classify.
template <typename T>
class Trainer {
 public:
  Trainer(AAEModel<T>& model, const TrainConfig& cfg);

  // Steps encoder+decoder on alpha * l_ae. Returns the unscaled l_ae.
  double reconstruction_phase(const Batch<T>& batch);

  // Steps the discriminator on the two-class cross entropy over a merged
  // prior/code batch. Returns l_disc.
  double discriminator_step(const Batch<T>& batch);

  // Steps the encoder on the adversarial loss with the discriminator frozen
  // (its accumulated gradients are discarded). Returns l_gen_adv, which is
  // always reported as mean -log D(E(x)) so the two generator-loss modes log
  // comparable numbers.
  double generator_step(const Batch<T>& batch);

  // Steps encoder and heads on l_c. Fills l_e/l_g/l_s only.
  StepLosses classification_phase(const Batch<T>& batch);

  // All phases in order on one batch; returns fully composed losses and
  // records the event sequence ["recon", "disc", "gen", "classify"].
  StepLosses train_step(const Batch<T>& batch);

  const std::vector<std::string>& last_events() const { return events_; }

  double lr() const;
  void set_lr(double lr);

  // Epoch loop with the validation-UA halving schedule. aux may be null.
  // Restores the best-validation parameters before returning. Logs one JSON
  // line per step and per epoch when log is non-null.
  FitResult fit(const SegmentSet& train, const SegmentSet* aux,
                const SegmentSet& validation, std::ostream* log);

  // Gender/speaker-only training on auxiliary data (the emotion mask is fully
  // on because aux segments carry no emotion label). The model then continues
  // into the main run as-is.
  void pretrain_auxiliary(const SegmentSet& aux, int epochs, std::ostream* log);

  i64 steps_taken() const { return step_; }

 private:
  AAEModel<T>& model_;
  TrainConfig cfg_;
  Sgd<T> opt_;
  PriorSampler<T> prior_;
  Rng batch_rng_;
  std::vector<std::string> events_;
  i64 step_ = 0;

  void run_epoch(const SegmentSet& train, const SegmentSet* aux,
                 std::vector<i64>& aux_order, size_t& aux_cursor,
                 std::ostream* log);
};

// Utterance-level emotion evaluation by posterior averaging over an
// utterance's segments. Utterances without a resolvable emotion label are
// skipped with a warning.
template <typename T>
EvalReport evaluate_emotion(AAEModel<T>& model, const SegmentSet& data,
                            int batch_size = 32);

// Batch statistics of the latent code over a whole set (eval-mode encoder).
struct LatentStats {
  double mean = 0.0;
  double variance = 0.0;
};
template <typename T>
LatentStats latent_stats(AAEModel<T>& model, const SegmentSet& data,
                         int batch_size = 32);

// Accuracy of the discriminator at telling prior draws from encoder codes on
// held-out data; 0.5 means the codes match the prior.
template <typename T>
double discriminator_accuracy(AAEModel<T>& model, const SegmentSet& data,
                              u64 prior_seed, int batch_size = 32);

// One d-vector per utterance: the mean of its segments' speaker-branch
// hidden activations.
template <typename T>
std::vector<SpeakerEmbedding> extract_dvectors(AAEModel<T>& model,
                                               const SegmentSet& data,
                                               int batch_size = 32);

extern template class Trainer<float>;
extern template class Trainer<double>;
extern template struct Batch<float>;
extern template struct Batch<double>;
extern template Batch<float> make_batch(const SegmentSet&,
                                        const std::vector<i64>&);
extern template Batch<double> make_batch(const SegmentSet&,
                                         const std::vector<i64>&);
extern template EvalReport evaluate_emotion(AAEModel<float>&,
                                            const SegmentSet&, int);
extern template EvalReport evaluate_emotion(AAEModel<double>&,
                                            const SegmentSet&, int);
extern template LatentStats latent_stats(AAEModel<float>&, const SegmentSet&,
                                         int);
extern template LatentStats latent_stats(AAEModel<double>&, const SegmentSet&,
                                         int);
extern template double discriminator_accuracy(AAEModel<float>&,
                                              const SegmentSet&, u64, int);
extern template double discriminator_accuracy(AAEModel<double>&,
                                              const SegmentSet&, u64, int);
extern template std::vector<SpeakerEmbedding> extract_dvectors(
    AAEModel<float>&, const SegmentSet&, int);
extern template std::vector<SpeakerEmbedding> extract_dvectors(
    AAEModel<double>&, const SegmentSet&, int);

}  // namespace mtae
