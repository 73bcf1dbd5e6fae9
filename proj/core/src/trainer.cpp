#include "mtae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "mtae/rng.hpp"

namespace mtae {

void TrainConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ConfigError("alpha must be in (0,1]");
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must be in (0,1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(lr_floor < learning_rate))
    throw ConfigError("lr_floor must be below learning_rate");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(aux_mix_ratio >= 0.0 && aux_mix_ratio < 1.0))
    throw ConfigError("aux_mix_ratio must be in [0,1)");
}

void compose_step_losses(StepLosses& losses, double alpha, double beta) {
  losses.l_c = beta * losses.l_e + (1.0 - beta) * (losses.l_g + losses.l_s);
  losses.l_mtae = alpha * losses.l_ae + losses.l_c;
}

std::string step_losses_to_json(const StepLosses& l, i64 step, double lr) {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["l_ae"] = l.l_ae;
  j["l_disc"] = l.l_disc;
  j["l_gen_adv"] = l.l_gen_adv;
  j["l_e"] = l.l_e;
  j["l_g"] = l.l_g;
  j["l_s"] = l.l_s;
  j["l_c"] = l.l_c;
  j["l_mtae"] = l.l_mtae;
  j["lr"] = lr;
  return j.dump();
}

StepLosses step_losses_from_json(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  StepLosses l;
  l.l_ae = j.at("l_ae").get<double>();
  l.l_disc = j.at("l_disc").get<double>();
  l.l_gen_adv = j.at("l_gen_adv").get<double>();
  l.l_e = j.at("l_e").get<double>();
  l.l_g = j.at("l_g").get<double>();
  l.l_s = j.at("l_s").get<double>();
  l.l_c = j.at("l_c").get<double>();
  l.l_mtae = j.at("l_mtae").get<double>();
  return l;
}

namespace {

template <typename T>
void scale_in_place(Tensor<T>& t, double factor) {
  T f = static_cast<T>(factor);
  for (auto& v : t.data()) v *= f;
}

template <typename T>
void add_in_place(Tensor<T>& dst, const Tensor<T>& src) {
  const T* s = src.data().data();
  T* d = dst.ptr();
  for (i64 i = 0; i < dst.numel(); ++i) d[i] += s[i];
}

void check_finite(double value, const char* phase, i64 step) {
  if (!std::isfinite(value))
    throw Error(std::string(phase) + " loss is not finite at step " +
                std::to_string(step));
}

}  // namespace

template <typename T>
Batch<T> make_batch(const SegmentSet& set, const std::vector<i64>& indices) {
  const i64 b = static_cast<i64>(indices.size());
  Batch<T> batch{Tensor<T>({b, 1, set.rows, set.cols}), {}, {}, {}};
  batch.emotion.reserve(static_cast<size_t>(b));
  batch.gender.reserve(static_cast<size_t>(b));
  batch.speaker.reserve(static_cast<size_t>(b));
  T* out = batch.x.ptr();
  const i64 n = set.segment_numel();
  for (i64 row = 0; row < b; ++row) {
    const float* src = set.segment_ptr(indices[static_cast<size_t>(row)]);
    for (i64 v = 0; v < n; ++v) out[row * n + v] = static_cast<T>(src[v]);
    const SegmentInfo& info = set.segments[static_cast<size_t>(indices[static_cast<size_t>(row)])];
    batch.emotion.push_back(info.emotion);
    batch.gender.push_back(info.gender);
    batch.speaker.push_back(info.speaker);
  }
  return batch;
}

template <typename T>
Trainer<T>::Trainer(AAEModel<T>& model, const TrainConfig& cfg)
    : model_(model),
      cfg_(cfg),
      opt_(static_cast<T>(cfg.learning_rate)),
      prior_(derive_seed(cfg.seed, "prior"), model.config().latent_shape()),
      batch_rng_(derive_seed(cfg.seed, "batches")) {
  cfg_.validate();
}

template <typename T>
double Trainer<T>::lr() const {
  return static_cast<double>(opt_.lr());
}

template <typename T>
void Trainer<T>::set_lr(double lr) {
  opt_.set_lr(static_cast<T>(lr));
}

template <typename T>
double Trainer<T>::reconstruction_phase(const Batch<T>& batch) {
  Tensor<T> z = model_.encode(batch.x, Mode::train);
  Tensor<T> xhat = model_.decode(z, Mode::train);
  LossGrad<T> loss = reconstruction_loss(batch.x, xhat);
  check_finite(loss.value, "reconstruction", step_);
  scale_in_place(loss.grad, cfg_.alpha);
  Tensor<T> grad_z = model_.decoder_backward(loss.grad);
  model_.encoder_backward(grad_z);
  opt_.step(model_.encoder_params());
  opt_.step(model_.decoder_params());
  return loss.value;
}

template <typename T>
double Trainer<T>::discriminator_step(const Batch<T>& batch) {
  const i64 b = batch.size();
  Tensor<T> prior = prior_.sample(b);
  Tensor<T> codes = model_.encode(batch.x, Mode::eval);

  auto shape = prior.shape();
  shape[0] = 2 * b;
  Tensor<T> merged(shape);
  std::copy(prior.data().begin(), prior.data().end(), merged.data().begin());
  std::copy(codes.data().begin(), codes.data().end(),
            merged.data().begin() + prior.numel());
  std::vector<int> targets(static_cast<size_t>(2 * b), kDiscCode);
  std::fill(targets.begin(), targets.begin() + b, kDiscPrior);

  Tensor<T> probs = model_.discriminate(merged, Mode::train);
  LossGrad<T> loss = cross_entropy(probs, targets);
  check_finite(loss.value, "discriminator", step_);
  model_.discriminator_backward(loss.grad);
  opt_.step(model_.discriminator_params());
  return loss.value;
}

template <typename T>
double Trainer<T>::generator_step(const Batch<T>& batch) {
  const i64 b = batch.size();
  Tensor<T> z = model_.encode(batch.x, Mode::train);
  Tensor<T> probs = model_.discriminate(z, Mode::train);

  std::vector<int> fool_targets(static_cast<size_t>(b), kDiscPrior);
  LossGrad<T> fool = cross_entropy(probs, fool_targets);
  check_finite(fool.value, "generator", step_);

  Tensor<T> grad_probs;
  if (cfg_.literal_generator_loss) {
    // Gradient of mean_b log(1 - D(E(x))) = mean_b log p_code.
    grad_probs = Tensor<T>(probs.shape());
    const T* p = probs.ptr();
    T* g = grad_probs.ptr();
    for (i64 row = 0; row < b; ++row) {
      T p_code = std::max(p[row * 2 + kDiscCode], static_cast<T>(1e-12));
      g[row * 2 + kDiscCode] = static_cast<T>(1.0) / (static_cast<T>(b) * p_code);
    }
  } else {
    grad_probs = std::move(fool.grad);
  }

  Tensor<T> grad_z = model_.discriminator_backward(grad_probs);
  model_.encoder_backward(grad_z);
  opt_.step(model_.encoder_params());
  Sgd<T>::zero(model_.discriminator_params());
  return fool.value;
}

template <typename T>
StepLosses Trainer<T>::classification_phase(const Batch<T>& batch) {
  StepLosses losses;
  Tensor<T> z = model_.encode(batch.x, Mode::train);
  Tensor<T> grad_z(z.shape());
  bool any = false;

  {
    Tensor<T> probs = model_.classify(Task::emotion, z, Mode::train);
    LossGrad<T> loss = cross_entropy(probs, batch.emotion);
    check_finite(loss.value, "emotion", step_);
    losses.l_e = loss.value;
    scale_in_place(loss.grad, cfg_.beta);
    Tensor<T> g = model_.head_backward(Task::emotion, loss.grad);
    add_in_place(grad_z, g);
    any = true;
  }
  if (model_.has_task(Task::gender)) {
    Tensor<T> probs = model_.classify(Task::gender, z, Mode::train);
    LossGrad<T> loss = cross_entropy(probs, batch.gender);
    check_finite(loss.value, "gender", step_);
    losses.l_g = loss.value;
    scale_in_place(loss.grad, 1.0 - cfg_.beta);
    Tensor<T> g = model_.head_backward(Task::gender, loss.grad);
    add_in_place(grad_z, g);
  }
  if (model_.has_task(Task::speaker)) {
    Tensor<T> probs = model_.classify(Task::speaker, z, Mode::train);
    LossGrad<T> loss = cross_entropy(probs, batch.speaker);
    check_finite(loss.value, "speaker", step_);
    losses.l_s = loss.value;
    scale_in_place(loss.grad, 1.0 - cfg_.beta);
    Tensor<T> g = model_.head_backward(Task::speaker, loss.grad);
    add_in_place(grad_z, g);
  }
  (void)any;

  model_.encoder_backward(grad_z);
  opt_.step(model_.encoder_params());
  opt_.step(model_.head_params(Task::emotion));
  if (model_.has_task(Task::gender)) opt_.step(model_.head_params(Task::gender));
  if (model_.has_task(Task::speaker)) opt_.step(model_.head_params(Task::speaker));
  return losses;
}

template <typename T>
StepLosses Trainer<T>::train_step(const Batch<T>& batch) {
  events_.clear();
  StepLosses losses;
  losses.l_ae = reconstruction_phase(batch);
  events_.push_back("recon");
  losses.l_disc = discriminator_step(batch);
  events_.push_back("disc");
  losses.l_gen_adv = generator_step(batch);
  events_.push_back("gen");
  StepLosses cls = classification_phase(batch);
  events_.push_back("classify");
  losses.l_e = cls.l_e;
  losses.l_g = cls.l_g;
  losses.l_s = cls.l_s;
  compose_step_losses(losses, cfg_.alpha, cfg_.beta);
  ++step_;
  return losses;
}

template <typename T>
void Trainer<T>::run_epoch(const SegmentSet& train, const SegmentSet* aux,
                           std::vector<i64>& aux_order, size_t& aux_cursor,
                           std::ostream* log) {
  std::vector<i64> order(static_cast<size_t>(train.size()));
  std::iota(order.begin(), order.end(), 0);
  batch_rng_.shuffle(order);

  const i64 b = cfg_.batch_size;
  i64 n_aux = 0;
  if (aux != nullptr && aux->size() > 0 && cfg_.aux_mix_ratio > 0.0) {
    n_aux = static_cast<i64>(std::ceil(cfg_.aux_mix_ratio * static_cast<double>(b)));
    n_aux = std::min(n_aux, b - 1);
  }
  const i64 n_primary = b - n_aux;
  const i64 n_batches = std::max<i64>(1, train.size() / n_primary);

  for (i64 batch_index = 0; batch_index < n_batches; ++batch_index) {
    i64 first = batch_index * n_primary;
    i64 last = std::min<i64>(train.size(), first + n_primary);
    std::vector<i64> primary(order.begin() + first, order.begin() + last);
    Batch<T> batch = make_batch<T>(train, primary);
    if (n_aux > 0) {
      std::vector<i64> aux_idx;
      aux_idx.reserve(static_cast<size_t>(n_aux));
      for (i64 k = 0; k < n_aux; ++k) {
        if (aux_cursor >= aux_order.size()) {
          batch_rng_.shuffle(aux_order);
          aux_cursor = 0;
        }
        aux_idx.push_back(aux_order[aux_cursor++]);
      }
      Batch<T> aux_batch = make_batch<T>(*aux, aux_idx);
      Batch<T> merged{Tensor<T>({batch.size() + aux_batch.size(), 1,
                                 train.rows, train.cols}),
                      {}, {}, {}};
      std::copy(batch.x.data().begin(), batch.x.data().end(),
                merged.x.data().begin());
      std::copy(aux_batch.x.data().begin(), aux_batch.x.data().end(),
                merged.x.data().begin() + batch.x.numel());
      auto splice = [](std::vector<int>& out, const std::vector<int>& a,
                       const std::vector<int>& b2) {
        out = a;
        out.insert(out.end(), b2.begin(), b2.end());
      };
      splice(merged.emotion, batch.emotion, aux_batch.emotion);
      splice(merged.gender, batch.gender, aux_batch.gender);
      splice(merged.speaker, batch.speaker, aux_batch.speaker);
      batch = std::move(merged);
    }
    StepLosses losses = train_step(batch);
    if (log != nullptr)
      *log << step_losses_to_json(losses, step_, lr()) << "\n";
  }
}

template <typename T>
FitResult Trainer<T>::fit(const SegmentSet& train, const SegmentSet* aux,
                          const SegmentSet& validation, std::ostream* log) {
  if (train.size() == 0 || validation.size() == 0)
    throw Error("fit: empty train or validation split");

  LrSchedule schedule(cfg_.learning_rate, cfg_.patience, cfg_.lr_floor);
  set_lr(cfg_.learning_rate);

  std::vector<i64> aux_order;
  size_t aux_cursor = 0;
  if (aux != nullptr && aux->size() > 0) {
    aux_order.resize(static_cast<size_t>(aux->size()));
    std::iota(aux_order.begin(), aux_order.end(), 0);
    batch_rng_.shuffle(aux_order);
  }

  FitResult result;
  std::vector<T> best = model_.snapshot();
  for (int epoch = 1; epoch <= cfg_.max_epochs; ++epoch) {
    run_epoch(train, aux, aux_order, aux_cursor, log);
    EvalReport report = evaluate_emotion(model_, validation, cfg_.batch_size);
    auto decision = schedule.observe(report.ua);
    result.epochs_run = epoch;
    if (log != nullptr) {
      nlohmann::ordered_json j;
      j["epoch"] = epoch;
      j["val_wa"] = report.wa;
      j["val_ua"] = report.ua;
      j["lr"] = decision.lr;
      j["halved"] = decision.halved;
      *log << j.dump() << "\n";
    }
    if (decision.improved) {
      best = model_.snapshot();
      result.best_epoch = epoch;
      result.best_ua = report.ua;
    }
    if (decision.halved) {
      ++result.halvings;
      model_.restore(best);
      set_lr(decision.lr);
    }
    if (decision.stop) break;
  }
  model_.restore(best);
  return result;
}

template <typename T>
void Trainer<T>::pretrain_auxiliary(const SegmentSet& aux, int epochs,
                                    std::ostream* log) {
  if (aux.size() == 0) throw Error("pretrain: empty auxiliary set");
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::vector<i64> order(static_cast<size_t>(aux.size()));
    std::iota(order.begin(), order.end(), 0);
    batch_rng_.shuffle(order);
    const i64 b = cfg_.batch_size;
    const i64 n_batches = std::max<i64>(1, aux.size() / b);
    for (i64 batch_index = 0; batch_index < n_batches; ++batch_index) {
      i64 first = batch_index * b;
      i64 last = std::min<i64>(aux.size(), first + b);
      std::vector<i64> idx(order.begin() + first, order.begin() + last);
      StepLosses losses = train_step(make_batch<T>(aux, idx));
      if (log != nullptr)
        *log << step_losses_to_json(losses, step_, lr()) << "\n";
    }
  }
}

template <typename T>
EvalReport evaluate_emotion(AAEModel<T>& model, const SegmentSet& data,
                            int batch_size) {
  if (data.size() == 0) throw Error("evaluate: no segments");
  const int k = model.head(Task::emotion).classes();
  std::vector<std::vector<double>> sums(
      data.utterances.size(), std::vector<double>(static_cast<size_t>(k), 0.0));

  for (i64 first = 0; first < data.size(); first += batch_size) {
    i64 last = std::min<i64>(data.size(), first + batch_size);
    std::vector<i64> idx(static_cast<size_t>(last - first));
    std::iota(idx.begin(), idx.end(), first);
    Batch<T> batch = make_batch<T>(data, idx);
    Tensor<T> z = model.encode(batch.x, Mode::eval);
    Tensor<T> probs = model.classify(Task::emotion, z, Mode::eval);
    const T* p = probs.ptr();
    for (i64 row = 0; row < batch.size(); ++row) {
      i64 utt = data.segments[static_cast<size_t>(first + row)].utterance;
      for (int c = 0; c < k; ++c)
        sums[static_cast<size_t>(utt)][static_cast<size_t>(c)] +=
            static_cast<double>(p[row * k + c]);
    }
  }

  std::vector<int> y_true, y_pred;
  i64 skipped = 0;
  for (size_t u = 0; u < data.utterances.size(); ++u) {
    const UtteranceInfo& utt = data.utterances[u];
    if (utt.emotion < 0) {
      ++skipped;
      continue;
    }
    std::vector<double> mean = sums[u];
    for (auto& v : mean) v /= static_cast<double>(utt.n_segments);
    y_true.push_back(utt.emotion);
    y_pred.push_back(argmax_lowest(mean));
  }
  if (skipped > 0)
    log_warn("evaluate: skipped " + std::to_string(skipped) +
             " utterances without an emotion label");
  if (y_true.empty()) throw Error("evaluate: no labeled utterances");
  return compute_wa_ua(y_true, y_pred, k);
}

template <typename T>
LatentStats latent_stats(AAEModel<T>& model, const SegmentSet& data,
                         int batch_size) {
  if (data.size() == 0) throw Error("latent_stats: no segments");
  double sum = 0.0, sum_sq = 0.0;
  i64 count = 0;
  for (i64 first = 0; first < data.size(); first += batch_size) {
    i64 last = std::min<i64>(data.size(), first + batch_size);
    std::vector<i64> idx(static_cast<size_t>(last - first));
    std::iota(idx.begin(), idx.end(), first);
    Batch<T> batch = make_batch<T>(data, idx);
    Tensor<T> z = model.encode(batch.x, Mode::eval);
    for (i64 i = 0; i < z.numel(); ++i) {
      double v = static_cast<double>(z.ptr()[i]);
      sum += v;
      sum_sq += v * v;
    }
    count += z.numel();
  }
  LatentStats stats;
  stats.mean = sum / static_cast<double>(count);
  stats.variance = sum_sq / static_cast<double>(count) - stats.mean * stats.mean;
  return stats;
}

template <typename T>
double discriminator_accuracy(AAEModel<T>& model, const SegmentSet& data,
                              u64 prior_seed, int batch_size) {
  if (data.size() == 0) throw Error("discriminator_accuracy: no segments");
  PriorSampler<T> sampler(prior_seed, model.config().latent_shape());
  i64 correct = 0, total = 0;
  for (i64 first = 0; first < data.size(); first += batch_size) {
    i64 last = std::min<i64>(data.size(), first + batch_size);
    std::vector<i64> idx(static_cast<size_t>(last - first));
    std::iota(idx.begin(), idx.end(), first);
    Batch<T> batch = make_batch<T>(data, idx);
    Tensor<T> codes = model.encode(batch.x, Mode::eval);
    Tensor<T> prior = sampler.sample(batch.size());
    for (auto [z, label] : {std::pair<Tensor<T>*, int>{&codes, kDiscCode},
                            std::pair<Tensor<T>*, int>{&prior, kDiscPrior}}) {
      Tensor<T> probs = model.discriminate(*z, Mode::eval);
      const T* p = probs.ptr();
      for (i64 row = 0; row < batch.size(); ++row) {
        int pred = p[row * 2 + kDiscPrior] > p[row * 2 + kDiscCode]
                       ? kDiscPrior
                       : kDiscCode;
        correct += pred == label ? 1 : 0;
        ++total;
      }
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

template <typename T>
std::vector<SpeakerEmbedding> extract_dvectors(AAEModel<T>& model,
                                               const SegmentSet& data,
                                               int batch_size) {
  if (!model.has_task(Task::speaker))
    throw Error("d-vectors need a model with a speaker head");
  if (data.size() == 0) throw Error("extract_dvectors: no segments");

  std::vector<std::vector<double>> sums(data.utterances.size());
  for (i64 first = 0; first < data.size(); first += batch_size) {
    i64 last = std::min<i64>(data.size(), first + batch_size);
    std::vector<i64> idx(static_cast<size_t>(last - first));
    std::iota(idx.begin(), idx.end(), first);
    Batch<T> batch = make_batch<T>(data, idx);
    Tensor<T> z = model.encode(batch.x, Mode::eval);
    Tensor<T> hidden = model.dvector(z);
    const i64 dim = hidden.shape()[1];
    const T* h = hidden.ptr();
    for (i64 row = 0; row < batch.size(); ++row) {
      i64 utt = data.segments[static_cast<size_t>(first + row)].utterance;
      auto& acc = sums[static_cast<size_t>(utt)];
      if (acc.empty()) acc.assign(static_cast<size_t>(dim), 0.0);
      for (i64 d = 0; d < dim; ++d)
        acc[static_cast<size_t>(d)] += static_cast<double>(h[row * dim + d]);
    }
  }

  std::vector<SpeakerEmbedding> embeddings;
  embeddings.reserve(data.utterances.size());
  for (size_t u = 0; u < data.utterances.size(); ++u) {
    const UtteranceInfo& utt = data.utterances[u];
    SpeakerEmbedding e;
    e.speaker_id = utt.speaker_id;
    e.utterance_id = utt.id;
    e.values = sums[u];
    for (auto& v : e.values) v /= static_cast<double>(utt.n_segments);
    embeddings.push_back(std::move(e));
  }
  return embeddings;
}

template class Trainer<float>;
template class Trainer<double>;
template struct Batch<float>;
template struct Batch<double>;
template Batch<float> make_batch(const SegmentSet&, const std::vector<i64>&);
template Batch<double> make_batch(const SegmentSet&, const std::vector<i64>&);
template EvalReport evaluate_emotion(AAEModel<float>&, const SegmentSet&, int);
template EvalReport evaluate_emotion(AAEModel<double>&, const SegmentSet&, int);
template LatentStats latent_stats(AAEModel<float>&, const SegmentSet&, int);
template LatentStats latent_stats(AAEModel<double>&, const SegmentSet&, int);
template double discriminator_accuracy(AAEModel<float>&, const SegmentSet&,
                                       u64, int);
template double discriminator_accuracy(AAEModel<double>&, const SegmentSet&,
                                       u64, int);
template std::vector<SpeakerEmbedding> extract_dvectors(AAEModel<float>&,
                                                        const SegmentSet&, int);
template std::vector<SpeakerEmbedding> extract_dvectors(AAEModel<double>&,
                                                        const SegmentSet&, int);

}  // namespace mtae
